//! Computational domains and uniform cell-centred grids.
//!
//! Cells are numbered with the first axis varying fastest: in 2D the cell at
//! column `i` and row `j` has index `i + nx * j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that rectangle sides share one spacing.
const SPACING_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Rectangle,
}

/// An open interval or axis-aligned rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn interval(low: f64, high: f64) -> Result<Self> {
        Self::new(DomainKind::Interval, vec![(low, high)])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        Self::new(DomainKind::Rectangle, vec![x, y])
    }

    pub fn new(kind: DomainKind, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let dim = match kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        };
        if bounds.len() != dim {
            return Err(Error::config(
                "domain.bounds",
                format!("{kind:?} needs {dim} (low, high) pair(s), got {}", bounds.len()),
            ));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::config(
                    "domain.bounds",
                    format!("axis {axis}: need finite low < high, got ({lo}, {hi})"),
                ));
            }
        }
        Ok(Domain { kind, bounds })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| hi - lo).collect()
    }

    /// |Ω|, the product of the side lengths.
    pub fn measure(&self) -> f64 {
        self.side_lengths().iter().product()
    }

    /// Euclidean diameter of the closure.
    pub fn diameter(&self) -> f64 {
        self.side_lengths()
            .iter()
            .map(|l| l * l)
            .sum::<f64>()
            .sqrt()
    }
}

pub fn diameter(domain: &Domain) -> f64 {
    domain.diameter()
}

/// Uniform cell-centred partition with a single spacing `h` on every axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    domain: Domain,
    cells_per_axis: Vec<usize>,
    spacing: f64,
    centers: Vec<Vec<f64>>,
}

pub fn build_grid(domain: &Domain, cells_per_axis: &[usize]) -> Result<Grid> {
    Grid::new(domain.clone(), cells_per_axis)
}

impl Grid {
    pub fn new(domain: Domain, cells_per_axis: &[usize]) -> Result<Self> {
        if cells_per_axis.len() != domain.dim() {
            return Err(Error::config(
                "cells",
                format!(
                    "domain has {} axes but {} cell counts were given",
                    domain.dim(),
                    cells_per_axis.len()
                ),
            ));
        }
        if let Some(axis) = cells_per_axis.iter().position(|&c| c < 2) {
            return Err(Error::config(
                "cells",
                format!("axis {axis}: at least 2 cells are required"),
            ));
        }
        let sides = domain.side_lengths();
        let spacing = sides[0] / cells_per_axis[0] as f64;
        for axis in 1..sides.len() {
            let h = sides[axis] / cells_per_axis[axis] as f64;
            if ((h - spacing) / spacing).abs() > SPACING_RTOL {
                return Err(Error::config(
                    "cells",
                    format!(
                        "axis {axis}: spacing {h} differs from axis 0 spacing {spacing}; \
                         side lengths must be proportional to the cell counts"
                    ),
                ));
            }
        }

        let total: usize = cells_per_axis.iter().product();
        let centers = (0..total)
            .map(|idx| {
                let mut rem = idx;
                cells_per_axis
                    .iter()
                    .zip(domain.bounds())
                    .map(|(&n, &(lo, _))| {
                        let i = rem % n;
                        rem /= n;
                        lo + (i as f64 + 0.5) * spacing
                    })
                    .collect()
            })
            .collect();

        Ok(Grid {
            domain,
            cells_per_axis: cells_per_axis.to_vec(),
            spacing,
            centers,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells_per_axis
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// h^n.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn center(&self, idx: usize) -> &[f64] {
        &self.centers[idx]
    }

    /// Per-axis integer coordinates of a cell.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.cells_per_axis
            .iter()
            .map(|&n| {
                let i = idx % n;
                idx /= n;
                i
            })
            .collect()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (&i, &n) in multi.iter().zip(&self.cells_per_axis) {
            idx += i * stride;
            stride *= n;
        }
        idx
    }

    /// Index of the neighbour one step along `axis` (forward when `forward`).
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut multi = self.multi_index(idx);
        let n = self.cells_per_axis[axis];
        if forward {
            if multi[axis] + 1 >= n {
                return None;
            }
            multi[axis] += 1;
        } else {
            if multi[axis] == 0 {
                return None;
            }
            multi[axis] -= 1;
        }
        Some(self.linear_index(&multi))
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.centers[a]
            .iter()
            .zip(&self.centers[b])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Cell permutations induced by the isometries of the grid: reflections
    /// along each axis and, for square grids, the swap of the two axes.
    ///
    /// Each entry maps a cell index to its image. The identity comes first.
    pub fn symmetry_permutations(&self) -> Vec<Vec<usize>> {
        let dim = self.dim();
        let square = dim == 2 && self.cells_per_axis[0] == self.cells_per_axis[1];
        let swaps: &[bool] = if square { &[false, true] } else { &[false] };
        let mut perms = Vec::new();
        for &swap in swaps {
            for mask in 0..(1usize << dim) {
                let perm = (0..self.len())
                    .map(|idx| {
                        let mut m = self.multi_index(idx);
                        for (axis, mi) in m.iter_mut().enumerate() {
                            if mask & (1 << axis) != 0 {
                                *mi = self.cells_per_axis[axis] - 1 - *mi;
                            }
                        }
                        if swap {
                            m.swap(0, 1);
                        }
                        self.linear_index(&m)
                    })
                    .collect();
                perms.push(perm);
            }
        }
        perms
    }

    /// Sum of cell measures, accumulated cell by cell.
    pub fn total_measure(&self) -> f64 {
        let h = self.cell_measure();
        (0..self.len()).map(|_| h).sum()
    }
}
