//! Run configuration in TOML.
//!
//! ```toml
//! cells = [48]
//! s = 0.5
//! p = 2.0
//! alpha = 0.25
//!
//! [domain]
//! kind = "interval"
//! bounds = [[0.0, 1.0]]
//!
//! [solver]
//! seed = 7
//! ```
//!
//! Every table rejects unknown keys and the parser rejects duplicate keys.
//! Fields a command does not use are ignored by that command but still
//! range-checked.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::design::DesignVector;
use crate::eigensolver::SolverOptions;
use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainKind, Grid};
use crate::kernel::Quadrature;
use crate::limits::Profile;
use crate::records::RecordFormat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// One `[low, high]` pair per axis.
    pub bounds: Vec<[f64; 2]>,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            kind: DomainKind::Interval,
            bounds: vec![[0.0, 1.0]],
        }
    }
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        Domain::new(self.kind, self.bounds.iter().map(|b| (b[0], b[1])).collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: RecordFormat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub domain: DomainSpec,
    /// Cells per axis.
    pub cells: Vec<usize>,
    pub s: Option<f64>,
    pub s_values: Option<Vec<f64>>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub sigma_values: Option<Vec<f64>>,
    /// Kernel discretisation. Defaults to midpoint for the solvers and
    /// optimisers, corrected for `bbm-check` and `gamma-limit`.
    pub quadrature: Option<Quadrature>,
    /// Obstacle cell indices for `solve-hard`.
    pub obstacle: Option<Vec<usize>>,
    /// Potential values per cell for `solve-soft`.
    pub potential: Option<Vec<f64>>,
    /// Test function for `bbm-check`.
    pub profile: Option<Profile>,
    pub solver: SolverOptions,
    pub output: OutputSpec,
}

/// Parses and range-checks a TOML document.
pub fn parse_config(document: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(document).map_err(schema_error)?;
    config.validate()?;
    Ok(config)
}

fn schema_error(err: toml::de::Error) -> Error {
    let message = err.message().trim().to_string();
    // toml quotes the offending key in backticks.
    let key = message.split('`').nth(1).unwrap_or("document").to_string();
    Error::config(key, message)
}

fn range(key: &str, ok: bool, constraint: &str, value: impl std::fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, format!("{constraint}, got {value}")))
    }
}

fn check_s(key: &str, s: f64) -> Result<()> {
    range(key, s > 0.0 && s < 1.0, "s must satisfy 0 < s < 1", s)
}

fn check_increasing(key: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::config(key, "list must not be empty"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(key, "values must be strictly increasing"));
    }
    Ok(())
}

impl RunConfig {
    /// Range checks on every field that is present. Runs before any grid or
    /// kernel is allocated.
    pub fn validate(&self) -> Result<()> {
        let domain = self.domain.build()?;
        if self.cells.is_empty() {
            return Err(Error::config("cells", "missing: give the cell count per axis, e.g. cells = [48]"));
        }
        if self.cells.len() != domain.dim() {
            return Err(Error::config(
                "cells",
                format!("domain has {} axis/axes but {} cell counts were given", domain.dim(), self.cells.len()),
            ));
        }
        if let Some(axis) = self.cells.iter().position(|&c| c < 2) {
            return Err(Error::config("cells", format!("axis {axis} needs at least 2 cells")));
        }
        if let Some(s) = self.s {
            check_s("s", s)?;
        }
        if let Some(values) = &self.s_values {
            check_increasing("s_values", values)?;
            for &s in values {
                check_s("s_values", s)?;
            }
        }
        if let Some(p) = self.p {
            range("p", p > 1.0 && p.is_finite(), "p must satisfy 1 < p < ∞", p)?;
        }
        if let Some(alpha) = self.alpha {
            range("alpha", alpha > 0.0 && alpha < 1.0, "alpha must satisfy 0 < alpha < 1", alpha)?;
        }
        if let Some(sigma) = self.sigma {
            range("sigma", sigma >= 0.0 && sigma.is_finite(), "sigma must satisfy σ ≥ 0", sigma)?;
        }
        if let Some(values) = &self.sigma_values {
            check_increasing("sigma_values", values)?;
            for &sigma in values {
                range("sigma_values", sigma > 0.0 && sigma.is_finite(), "every σ must satisfy σ > 0", sigma)?;
            }
        }
        let cells: usize = self.cells.iter().product();
        if let Some(obstacle) = &self.obstacle {
            if let Some(&c) = obstacle.iter().find(|&&c| c >= cells) {
                return Err(Error::config("obstacle", format!("cell {c} out of range 0..{cells}")));
            }
        }
        if let Some(potential) = &self.potential {
            if potential.len() != cells {
                return Err(Error::config(
                    "potential",
                    format!("need one value per cell ({cells}), got {}", potential.len()),
                ));
            }
            if let Some(i) = potential.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::config("potential", format!("cell {i}: values must lie in [0, 1]")));
            }
        }
        self.solver.validate()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain.build()?, &self.cells)
    }

    pub fn s(&self) -> Result<f64> {
        self.s.ok_or_else(|| missing("s", "s = 0.5"))
    }

    pub fn p(&self) -> Result<f64> {
        self.p.ok_or_else(|| missing("p", "p = 2.0"))
    }

    pub fn alpha(&self) -> Result<f64> {
        self.alpha.ok_or_else(|| missing("alpha", "alpha = 0.25"))
    }

    pub fn sigma(&self) -> Result<f64> {
        self.sigma.ok_or_else(|| missing("sigma", "sigma = 10.0"))
    }

    pub fn s_values(&self) -> Result<&[f64]> {
        self.s_values
            .as_deref()
            .ok_or_else(|| missing("s_values", "s_values = [0.6, 0.8, 0.9]"))
    }

    pub fn sigma_values(&self) -> Result<&[f64]> {
        self.sigma_values
            .as_deref()
            .ok_or_else(|| missing("sigma_values", "sigma_values = [1.0, 10.0, 100.0]"))
    }

    pub fn quadrature_or(&self, default: Quadrature) -> Quadrature {
        self.quadrature.unwrap_or(default)
    }

    /// The `solve-hard` obstacle: `obstacle` if given, otherwise the first
    /// `α·N` cells.
    pub fn obstacle_design(&self, grid: &Grid) -> Result<DesignVector> {
        match (&self.obstacle, self.alpha) {
            (Some(cells), _) => DesignVector::from_cells(grid, cells),
            (None, Some(alpha)) => {
                let k = crate::design::binary_cell_count(alpha, grid.len())?;
                DesignVector::from_cells(grid, &(0..k).collect::<Vec<_>>())
            }
            (None, None) => Err(missing("obstacle", "obstacle = [0, 1, 2] (or alpha = 0.25)")),
        }
    }

    /// The `solve-soft` potential: `potential` if given, otherwise the
    /// indicator of the first `α·N` cells.
    pub fn potential_design(&self, grid: &Grid) -> Result<DesignVector> {
        match &self.potential {
            Some(values) => DesignVector::from_values(grid, values.clone()),
            None => match self.alpha {
                Some(_) => self.obstacle_design(grid),
                None => Err(missing("potential", "potential = [1.0, 0.0, ...] (or alpha = 0.25)")),
            },
        }
    }
}

fn missing(key: &str, example: &str) -> Error {
    Error::config(key, format!("required by this command but missing; add e.g. `{example}` or pass --{}", key.replace('_', "-")))
}
