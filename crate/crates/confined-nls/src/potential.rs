//! Confining potentials V(x) and the shift constant that makes
//! -d²/dx²/2 + V + C₀ nonnegative.

use crate::error::{Error, Result};
use crate::grid::XGrid;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// The supported potential families. All are real and bounded below; the
/// solver never needs more than their samples on the x grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// V(x) = omega x² / 2.
    Harmonic { omega: f64 },
    /// V(x) = scale · x^exponent, exponent even.
    PowerLaw { exponent: u32, scale: f64 },
    /// V(x) = exp(rate · |x|).
    Exponential { rate: f64 },
    /// Gaussian well/bump V(x) = depth · exp(-(x/width)²). Negative depth digs
    /// a well; the shift constant then lifts it back above zero.
    BoundedWell { depth: f64, width: f64 },
    /// Samples matching the configured x grid, one value per interior node.
    Tabulated { values: Vec<f64> },
}

impl Potential {
    pub fn validate(&self, grid: &XGrid) -> Result<()> {
        match self {
            Potential::Zero => Ok(()),
            Potential::Harmonic { omega } => {
                if !(omega.is_finite() && *omega > 0.0) {
                    return Err(Error::invalid("potential.omega", "must be finite and > 0"));
                }
                Ok(())
            }
            Potential::PowerLaw { exponent, scale } => {
                if *exponent < 2 || exponent % 2 != 0 {
                    return Err(Error::invalid(
                        "potential.exponent",
                        "must be even and at least 2",
                    ));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid("potential.scale", "must be finite and > 0"));
                }
                Ok(())
            }
            Potential::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::invalid("potential.rate", "must be finite and > 0"));
                }
                Ok(())
            }
            Potential::BoundedWell { depth, width } => {
                if !depth.is_finite() {
                    return Err(Error::invalid("potential.depth", "must be finite"));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::invalid("potential.width", "must be finite and > 0"));
                }
                Ok(())
            }
            Potential::Tabulated { values } => {
                if values.len() != grid.n_x() {
                    return Err(Error::invalid(
                        "potential.values",
                        format!(
                            "got {} samples, x grid has {} interior nodes",
                            values.len(),
                            grid.n_x()
                        ),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("potential.values", "contains non-finite entries"));
                }
                Ok(())
            }
        }
    }

    /// Pointwise value for the closed-form families.
    ///
    /// Panics for `Tabulated`, which is only defined on its grid; use
    /// [`Potential::values_on`] there.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic { omega } => 0.5 * omega * x * x,
            Potential::PowerLaw { exponent, scale } => scale * x.powi(*exponent as i32),
            Potential::Exponential { rate } => (rate * x.abs()).exp(),
            Potential::BoundedWell { depth, width } => {
                let r = x / width;
                depth * (-r * r).exp()
            }
            Potential::Tabulated { .. } => {
                panic!("tabulated potentials are grid samples; use values_on")
            }
        }
    }

    /// Samples on the interior nodes of the grid, after validation.
    pub fn values_on(&self, grid: &XGrid) -> Result<Vec<f64>> {
        self.validate(grid)?;
        Ok(match self {
            Potential::Tabulated { values } => values.clone(),
            _ => grid.xs().iter().map(|&x| self.eval(x)).collect(),
        })
    }

    /// Loads a tabulated potential from a one-column text file (one sample per
    /// line; blank lines and `#` comments ignored).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::invalid(
                    "potential.file",
                    format!("{}:{}: not a number: {line:?}", path.display(), lineno + 1),
                )
            })?;
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::invalid("potential.file", "no samples found"));
        }
        Ok(Potential::Tabulated { values })
    }
}

/// Smallest C₀ ≥ 0 with V + C₀ ≥ 0 on the sampled grid.
pub fn lower_bound_constant(values: &[f64]) -> f64 {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (-min).max(0.0)
}
