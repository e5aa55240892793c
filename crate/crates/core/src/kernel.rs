//! Discrete Gagliardo kernel, nonlocal and local energies.
//!
//! The nonlocal energy is `E(u) = Σ_{i≠j} W_ij |u_i − u_j|^p`, counting every
//! unordered pair twice like the continuum double integral over Ω×Ω. The factor
//! ½ of the Rayleigh quotient is applied by the eigensolver, never here.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::Grid;
use crate::par::{fill_indexed, fill_rows, pairwise_sum, Execution};
use crate::quadrature::integrate_gl;

/// How the singular double integral is discretised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    /// `W_ij = h^{2n} / |x_i − x_j|^{n+sp}` off the diagonal, nothing on it.
    #[default]
    Midpoint,
    /// Midpoint weights plus the self-cell integral of an affine function,
    /// folded into the nearest-neighbour weights along each axis. Keeps the
    /// energy consistent as `s → 1`, where the midpoint rule loses the mass
    /// concentrating near the diagonal.
    Corrected,
}

/// Energy functional whose Rayleigh quotient the eigensolver minimises.
pub trait Seminorm: Send + Sync {
    fn len(&self) -> usize;

    fn exponent(&self) -> f64;

    fn energy(&self, u: &[f64]) -> f64;

    /// Exact gradient of [`Seminorm::energy`], written into `out`.
    fn gradient_into(&self, u: &[f64], out: &mut [f64]);

    /// Symmetric `Q` with `½ E(u) = uᵀ Q u`, available when `p = 2`.
    fn half_energy_matrix(&self) -> Option<DMatrix<f64>>;

    /// Cell permutations that leave the energy invariant (identity first).
    fn symmetries(&self) -> &[Vec<usize>];
}

/// Dense symmetric weights of the discrete kernel `|x − y|^{−(n+sp)}`.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    s: f64,
    p: f64,
    dim: usize,
    size: usize,
    quadrature: Quadrature,
    cell_measure: f64,
    weights: Vec<f64>,
    symmetries: Vec<Vec<usize>>,
}

pub(crate) fn check_sp(s: f64, p: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("s must satisfy 0 < s < 1, got {s}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("p must satisfy 1 < p < ∞, got {p}")));
    }
    Ok(())
}

pub fn assemble_kernel(grid: &Grid, s: f64, p: f64) -> Result<KernelMatrix> {
    assemble_kernel_with(grid, s, p, Quadrature::Midpoint, Execution::for_len(grid.len()))
}

pub fn assemble_kernel_with(
    grid: &Grid,
    s: f64,
    p: f64,
    quadrature: Quadrature,
    exec: Execution,
) -> Result<KernelMatrix> {
    check_sp(s, p)?;
    let n = grid.len();
    let dim = grid.dim();
    let cell_measure = grid.cell_measure();
    let exponent = dim as f64 + s * p;
    let numerator = cell_measure * cell_measure;

    let mut weights = vec![0.0; n * n];
    fill_rows(&mut weights, n, exec, |i, row| {
        for (j, w) in row.iter_mut().enumerate() {
            if j != i {
                *w = numerator / grid.distance(i, j).powf(exponent);
            }
        }
    });

    if quadrature == Quadrature::Corrected {
        let c = self_cell_correction(dim, grid.spacing(), s, p)?;
        for i in 0..n {
            for axis in 0..dim {
                if let Some(j) = grid.neighbor(i, axis, true) {
                    weights[i * n + j] += c;
                    weights[j * n + i] += c;
                }
            }
        }
    }

    Ok(KernelMatrix {
        s,
        p,
        dim,
        size: n,
        quadrature,
        cell_measure,
        weights,
        symmetries: grid.symmetry_permutations(),
    })
}

/// Weight added to each axis-neighbour pair by [`Quadrature::Corrected`].
///
/// With `J = ∫_{[−h,h]^n} Π(h − |t_i|) |t_1|^p |t|^{−(n+sp)} dt` (the self-cell
/// integral for unit slope along one axis), an interior cell owns half of each
/// of its two neighbour pairs, each counted twice, so the weight is `J / (2hᵖ)`.
pub fn self_cell_correction(dim: usize, h: f64, s: f64, p: f64) -> Result<f64> {
    check_sp(s, p)?;
    let q = p - 1.0 - s * p;
    let j = match dim {
        1 => 2.0 * h.powf(q + 2.0) / ((q + 1.0) * (q + 2.0)),
        2 => {
            // Polar coordinates on the quadrant, split at the diagonal; the
            // radial integral is closed form.
            let radial = |theta: f64| {
                let (sn, cs) = theta.sin_cos();
                let r = h / cs.max(sn);
                let poly = h * h * r.powf(q + 1.0) / (q + 1.0)
                    - h * (cs + sn) * r.powf(q + 2.0) / (q + 2.0)
                    + cs * sn * r.powf(q + 3.0) / (q + 3.0);
                cs.powf(p) * poly
            };
            4.0 * (integrate_gl(radial, 0.0, FRAC_PI_4, 64)
                + integrate_gl(radial, FRAC_PI_4, 2.0 * FRAC_PI_4, 64))
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "self-cell correction for dimension {dim}"
            )))
        }
    };
    Ok(j / (2.0 * h.powf(p)))
}

impl KernelMatrix {
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.size..(i + 1) * self.size]
    }

    pub fn energy_with(&self, u: &[f64], exec: Execution) -> Result<f64> {
        check_len(self.size, u.len())?;
        let p = self.p;
        let mut rows = vec![0.0; self.size];
        fill_indexed(&mut rows, exec, |i| {
            let ui = u[i];
            let row = self.row(i);
            if p == 2.0 {
                row.iter().zip(u).map(|(w, uj)| w * (ui - uj) * (ui - uj)).sum()
            } else {
                row.iter()
                    .zip(u)
                    .map(|(w, uj)| w * (ui - uj).abs().powf(p))
                    .sum()
            }
        });
        Ok(pairwise_sum(&rows))
    }

    pub fn gradient_with(&self, u: &[f64], exec: Execution) -> Result<Vec<f64>> {
        check_len(self.size, u.len())?;
        let mut out = vec![0.0; self.size];
        self.gradient_fill(u, &mut out, exec);
        Ok(out)
    }

    fn gradient_fill(&self, u: &[f64], out: &mut [f64], exec: Execution) {
        let p = self.p;
        let scale = 2.0 * p;
        fill_indexed(out, exec, |i| {
            let ui = u[i];
            let row = self.row(i);
            let acc: f64 = if p == 2.0 {
                row.iter().zip(u).map(|(w, uj)| w * (ui - uj)).sum()
            } else {
                row.iter()
                    .zip(u)
                    .map(|(w, uj)| {
                        let d = ui - uj;
                        w * d.abs().powf(p - 1.0) * d.signum()
                    })
                    .sum()
            };
            scale * acc
        });
    }
}

impl Seminorm for KernelMatrix {
    fn len(&self) -> usize {
        self.size
    }

    fn exponent(&self) -> f64 {
        self.p
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.energy_with(u, Execution::for_len(self.size))
            .expect("cell vector length checked by caller")
    }

    fn gradient_into(&self, u: &[f64], out: &mut [f64]) {
        self.gradient_fill(u, out, Execution::for_len(self.size));
    }

    fn half_energy_matrix(&self) -> Option<DMatrix<f64>> {
        if self.p != 2.0 {
            return None;
        }
        // ½ Σ_{i≠j} W_ij (u_i − u_j)² = uᵀ (D − W) u.
        let n = self.size;
        Some(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.row(i).iter().sum()
            } else {
                -self.weight(i, j)
            }
        }))
    }

    fn symmetries(&self) -> &[Vec<usize>] {
        &self.symmetries
    }
}

/// `[u]^p_disc = Σ_{i≠j} W_ij |u_i − u_j|^p`.
pub fn gagliardo_energy(u: &[f64], kernel: &KernelMatrix) -> Result<f64> {
    kernel.energy_with(u, Execution::for_len(kernel.size))
}

/// Exact gradient of [`gagliardo_energy`]:
/// `g_i = 2p Σ_j W_ij |u_i − u_j|^{p−2} (u_i − u_j)`.
pub fn gagliardo_gradient(u: &[f64], kernel: &KernelMatrix) -> Result<Vec<f64>> {
    kernel.gradient_with(u, Execution::for_len(kernel.size))
}

/// `σ Σ φ_i |u_i|^p h^n`.
pub fn penalty_energy(u: &[f64], phi: &[f64], sigma: f64, grid: &Grid, p: f64) -> Result<f64> {
    check_len(grid.len(), u.len())?;
    check_len(grid.len(), phi.len())?;
    if sigma < 0.0 {
        return Err(Error::Parameter(format!("sigma must satisfy σ ≥ 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let terms: Vec<f64> = u
        .iter()
        .zip(phi)
        .map(|(ui, fi)| fi * ui.abs().powf(p))
        .collect();
    Ok(sigma * pairwise_sum(&terms) * grid.cell_measure())
}

/// `‖u‖_p^p = Σ |u_i|^p h^n`.
pub fn lp_mass(u: &[f64], grid: &Grid, p: f64) -> f64 {
    lp_mass_weighted(u, grid.cell_measure(), p)
}

pub(crate) fn lp_mass_weighted(u: &[f64], measure: f64, p: f64) -> f64 {
    let terms: Vec<f64> = u.iter().map(|x| x.abs().powf(p)).collect();
    pairwise_sum(&terms) * measure
}

/// Forward-difference `p`-Dirichlet energy `Σ |∂_h u|^p h^n`, summed over axes.
/// The last cell along an axis reuses the backward difference.
#[derive(Clone, Debug)]
pub struct LocalDirichlet {
    p: f64,
    size: usize,
    // (a, b, weight): weight · |u_b − u_a|^p
    edges: Vec<(usize, usize, f64)>,
    symmetries: Vec<Vec<usize>>,
}

impl LocalDirichlet {
    pub fn new(grid: &Grid, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Parameter(format!("p must satisfy 1 < p < ∞, got {p}")));
        }
        let h = grid.spacing();
        let w = grid.cell_measure() / h.powf(p);
        let mut edges = Vec::new();
        for i in 0..grid.len() {
            for axis in 0..grid.dim() {
                match grid.neighbor(i, axis, true) {
                    Some(j) => edges.push((i, j, w)),
                    None => {
                        let j = grid
                            .neighbor(i, axis, false)
                            .expect("grids have at least two cells per axis");
                        edges.push((j, i, w));
                    }
                }
            }
        }
        Ok(LocalDirichlet {
            p,
            size: grid.len(),
            edges,
            symmetries: vec![(0..grid.len()).collect()],
        })
    }
}

impl Seminorm for LocalDirichlet {
    fn len(&self) -> usize {
        self.size
    }

    fn exponent(&self) -> f64 {
        self.p
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .edges
            .iter()
            .map(|&(a, b, w)| w * (u[b] - u[a]).abs().powf(self.p))
            .collect();
        pairwise_sum(&terms)
    }

    fn gradient_into(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(a, b, w) in &self.edges {
            let d = u[b] - u[a];
            let g = w * self.p * d.abs().powf(self.p - 1.0) * d.signum();
            out[b] += g;
            out[a] -= g;
        }
    }

    fn half_energy_matrix(&self) -> Option<DMatrix<f64>> {
        if self.p != 2.0 {
            return None;
        }
        let mut q = DMatrix::zeros(self.size, self.size);
        for &(a, b, w) in &self.edges {
            let c = 0.5 * w;
            q[(a, a)] += c;
            q[(b, b)] += c;
            q[(a, b)] -= c;
            q[(b, a)] -= c;
        }
        Some(q)
    }

    fn symmetries(&self) -> &[Vec<usize>] {
        &self.symmetries
    }
}

pub fn local_energy(u: &[f64], grid: &Grid, p: f64) -> Result<f64> {
    check_len(grid.len(), u.len())?;
    Ok(LocalDirichlet::new(grid, p)?.energy(u))
}

/// Seminorm, penalty and mass of a cell vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// ½ E(u).
    pub seminorm_term: f64,
    /// σ Σ φ |u|^p h^n.
    pub penalty_term: f64,
    /// ‖u‖_p^p.
    pub mass: f64,
}

impl EnergyBreakdown {
    pub fn rayleigh(&self) -> f64 {
        (self.seminorm_term + self.penalty_term) / self.mass
    }
}
