//! Obstacle design: potentials and sets under a measure constraint, the
//! bathtub update, alternating minimisation and the exhaustive oracle.

use serde::{Deserialize, Serialize};

use crate::eigensolver::{
    initial_guess, solve_hard, solve_hard_from, solve_soft, solve_soft_from, Extremal,
    SolverOptions,
};
use crate::error::{check_len, Error, Result};
use crate::geometry::Grid;
use crate::kernel::Seminorm;
use crate::par::{map_indexed, pairwise_sum, Execution};

/// Largest number of designs the exhaustive oracle will enumerate.
pub const ORACLE_BUDGET: u128 = 1_000_000;

const MASS_TOL: f64 = 1e-12;
const INTEGRAL_TOL: f64 = 1e-9;

/// Potential `φ ∈ [0, 1]` per cell; binary designs are characteristic
/// functions of obstacle sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    values: Vec<f64>,
    mass: f64,
    binary: bool,
}

impl DesignVector {
    pub fn from_cells(grid: &Grid, cells: &[usize]) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        for &c in cells {
            if c >= grid.len() {
                return Err(Error::Constraint(format!(
                    "obstacle cell {c} out of range (grid has {} cells)",
                    grid.len()
                )));
            }
            values[c] = 1.0;
        }
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Constraint(format!(
                "potential value {} at cell {i} is outside [0, 1]",
                values[i]
            )));
        }
        let binary = values.iter().all(|&v| v == 0.0 || v == 1.0);
        let mass = pairwise_sum(&values) * grid.cell_measure();
        Ok(DesignVector {
            values,
            mass,
            binary,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ φ_i h^n`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    /// Cells with `φ = 1`.
    pub fn cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.values[i] == 1.0).collect()
    }

    pub fn fractional_cells(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.values[i] > 0.0 && self.values[i] < 1.0)
            .collect()
    }

    /// Membership in the admissible class of mass `α|Ω|`.
    pub fn in_class(&self, alpha: f64, grid: &Grid) -> bool {
        (self.mass - alpha * grid.domain().measure()).abs() <= MASS_TOL * grid.domain().measure().max(1.0)
    }

    /// Image under a cell permutation (`perm[i]` is the image of cell `i`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut values = vec![0.0; self.len()];
        for (i, &j) in perm.iter().enumerate() {
            values[j] = self.values[i];
        }
        DesignVector {
            values,
            mass: self.mass,
            binary: self.binary,
        }
    }

    /// Number of cells where two designs differ.
    pub fn symmetric_difference(&self, other: &Self) -> usize {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Orders designs so that ties prefer obstacle mass on low cell indices.
fn design_precedes(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x > y;
        }
    }
    false
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BathtubMode {
    Relaxed,
    Binary,
}

/// `α · (cell count)` as an integer, or a configuration error suggesting the
/// nearest feasible fractions.
pub fn binary_cell_count(alpha: f64, cells: usize) -> Result<usize> {
    check_alpha(alpha)?;
    let q = alpha * cells as f64;
    let k = q.round();
    if (q - k).abs() > INTEGRAL_TOL || k < 1.0 || k >= cells as f64 {
        let lo = q.floor().max(1.0);
        let hi = q.ceil().min(cells as f64 - 1.0);
        return Err(Error::config(
            "alpha",
            format!(
                "binary designs need alpha·N integral, got {alpha}·{cells} = {q}; \
                 adjust N or use alpha = {}/{cells} = {} or {}/{cells} = {}",
                lo,
                lo / cells as f64,
                hi,
                hi / cells as f64
            ),
        ));
    }
    Ok(k as usize)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "alpha must satisfy 0 < alpha < 1, got {alpha}"
        )))
    }
}

/// Minimiser of `Σ φ_i |u_i|^p h^n` over potentials of mass `α|Ω|`: fill the
/// cells with the smallest `|u|` first (ties by ascending index).
pub fn bathtub_update(u: &[f64], alpha: f64, grid: &Grid, mode: BathtubMode) -> Result<DesignVector> {
    check_len(grid.len(), u.len())?;
    check_alpha(alpha)?;
    if let Some(i) = u.iter().position(|x| !x.is_finite()) {
        return Err(Error::Parameter(format!("non-finite value at cell {i}")));
    }
    let n = grid.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()).then(a.cmp(&b)));

    let mut values = vec![0.0; n];
    match mode {
        BathtubMode::Binary => {
            let k = binary_cell_count(alpha, n)?;
            for &i in &order[..k] {
                values[i] = 1.0;
            }
        }
        BathtubMode::Relaxed => {
            let q = alpha * n as f64;
            let mut full = (q + INTEGRAL_TOL).floor() as usize;
            let mut frac = q - full as f64;
            if frac < INTEGRAL_TOL {
                frac = 0.0;
            }
            if full >= n {
                full = n - 1;
                frac = 1.0;
            }
            for &i in &order[..full] {
                values[i] = 1.0;
            }
            if frac > 0.0 {
                values[order[full]] = frac;
            }
        }
    }
    DesignVector::from_values(grid, values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub lambda: f64,
    pub extremal: Extremal,
    pub design: DesignVector,
    pub outer_iterations: usize,
    /// Quotient after every accepted design update.
    pub objective_trace: Vec<f64>,
    /// Set when the alternation revisited an older design.
    pub cycle_detected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Problem {
    Hard,
    Soft(f64),
}

impl Problem {
    fn solve(
        self,
        seminorm: &dyn Seminorm,
        grid: &Grid,
        design: &DesignVector,
        opts: &SolverOptions,
        warm: Option<&[f64]>,
    ) -> Result<Extremal> {
        match self {
            Problem::Hard => solve_hard_from(seminorm, grid, design, opts, warm),
            Problem::Soft(sigma) => solve_soft_from(seminorm, grid, design, sigma, opts, warm),
        }
    }

    fn bathtub_mode(self) -> BathtubMode {
        match self {
            Problem::Hard => BathtubMode::Binary,
            Problem::Soft(_) => BathtubMode::Relaxed,
        }
    }
}

fn improvement_threshold(lambda: f64, opts: &SolverOptions) -> f64 {
    opts.tol_lambda.min(1e-9) * lambda.abs().max(1.0)
}

/// Best strictly improving exchange of the values of two cells.
fn best_exchange(
    problem: Problem,
    seminorm: &dyn Seminorm,
    grid: &Grid,
    design: &DesignVector,
    current: &Extremal,
    opts: &SolverOptions,
) -> Result<Option<(DesignVector, Extremal)>> {
    let vals = design.values();
    let mut pairs = Vec::new();
    for i in 0..vals.len() {
        for j in (i + 1)..vals.len() {
            if vals[i] != vals[j] {
                pairs.push((i, j));
            }
        }
    }
    let results = map_indexed(pairs.len(), Execution::default(), |k| {
        let (i, j) = pairs[k];
        let mut v = vals.to_vec();
        v.swap(i, j);
        let d = DesignVector::from_values(grid, v)?;
        let e = problem.solve(seminorm, grid, &d, opts, Some(&current.u))?;
        Ok::<_, Error>((d, e))
    });
    let threshold = current.lambda - improvement_threshold(current.lambda, opts);
    let mut best: Option<(DesignVector, Extremal)> = None;
    for r in results {
        let (d, e) = r?;
        let bound = best.as_ref().map_or(threshold, |(_, b)| b.lambda);
        if e.lambda < bound {
            best = Some((d, e));
        }
    }
    Ok(best)
}

fn alternate(
    problem: Problem,
    seminorm: &dyn Seminorm,
    grid: &Grid,
    alpha: f64,
    opts: &SolverOptions,
    initial: Option<DesignVector>,
    warm: Option<&[f64]>,
) -> Result<DesignResult> {
    opts.validate()?;
    check_len(grid.len(), seminorm.len())?;
    let mode = problem.bathtub_mode();
    let mut design = match initial {
        Some(d) => {
            check_len(grid.len(), d.len())?;
            if !d.in_class(alpha, grid) {
                return Err(Error::Constraint(format!(
                    "initial design has mass {} but alpha·|Ω| = {}",
                    d.mass(),
                    alpha * grid.domain().measure()
                )));
            }
            d
        }
        None => bathtub_update(&initial_guess(grid.len(), opts.seed), alpha, grid, mode)?,
    };
    let mut ext = problem.solve(seminorm, grid, &design, opts, warm)?;
    let mut trace = vec![ext.lambda];
    let mut visited = vec![design.values().to_vec()];
    let mut cycle = false;
    let mut outer = 0;

    while outer < opts.max_outer_iterations {
        outer += 1;
        let next = bathtub_update(&ext.u, alpha, grid, mode)?;
        if next.values() != design.values() {
            if visited.iter().any(|v| v.as_slice() == next.values()) {
                cycle = true;
                break;
            }
            let e = problem.solve(seminorm, grid, &next, opts, Some(&ext.u))?;
            if e.lambda > ext.lambda {
                // Both half-steps are exact minimisations; an increase is
                // solver noise on a plateau.
                break;
            }
            design = next;
            ext = e;
        } else {
            match best_exchange(problem, seminorm, grid, &design, &ext, opts)? {
                Some((d, e)) => {
                    design = d;
                    ext = e;
                }
                None => break,
            }
        }
        trace.push(ext.lambda);
        visited.push(design.values().to_vec());
    }

    let (design, ext) = canonicalize(seminorm, design, ext);
    Ok(DesignResult {
        lambda: ext.lambda,
        extremal: ext,
        design,
        outer_iterations: outer,
        objective_trace: trace,
        cycle_detected: cycle,
    })
}

/// Maps an optimum to its preferred image under the energy's symmetries.
fn canonicalize(
    seminorm: &dyn Seminorm,
    design: DesignVector,
    ext: Extremal,
) -> (DesignVector, Extremal) {
    let mut best = design.clone();
    let mut best_perm: Option<&Vec<usize>> = None;
    for perm in seminorm.symmetries().iter().skip(1) {
        let img = design.permuted(perm);
        if design_precedes(img.values(), best.values()) {
            best = img;
            best_perm = Some(perm);
        }
    }
    match best_perm {
        None => (design, ext),
        Some(perm) => {
            let mut u = vec![0.0; ext.u.len()];
            for (i, &j) in perm.iter().enumerate() {
                u[j] = ext.u[i];
            }
            (best, Extremal { u, ..ext })
        }
    }
}

/// Alternating minimisation for the hard obstacle problem with `|A| = α|Ω|`.
///
/// Alternates `solve_hard` with the binary bathtub update; when the set is
/// stable, tries the best single exchange of an obstacle cell with a free cell.
pub fn optimize_hard(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<DesignResult> {
    optimize_hard_from(seminorm, grid, alpha, opts, None)
}

pub fn optimize_hard_from(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    alpha: f64,
    opts: &SolverOptions,
    initial: Option<DesignVector>,
) -> Result<DesignResult> {
    binary_cell_count(alpha, grid.len())?;
    alternate(Problem::Hard, seminorm, grid, alpha, opts, initial, None)
}

/// Alternating minimisation for the soft obstacle problem over potentials of
/// mass `α|Ω|`.
pub fn optimize_soft(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    alpha: f64,
    sigma: f64,
    opts: &SolverOptions,
) -> Result<DesignResult> {
    optimize_soft_from(seminorm, grid, alpha, sigma, opts, None, None)
}

/// [`optimize_soft`] started from a given design and (for the iterative
/// backend) a given function.
pub fn optimize_soft_from(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    alpha: f64,
    sigma: f64,
    opts: &SolverOptions,
    initial: Option<DesignVector>,
    warm: Option<&[f64]>,
) -> Result<DesignResult> {
    check_alpha(alpha)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must satisfy σ > 0, got {sigma}")));
    }
    alternate(Problem::Soft(sigma), seminorm, grid, alpha, opts, initial, warm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    Hard,
    Soft(f64),
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(x) => x / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
pub fn unrank_combination(mut rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for pos in 0..k {
        let mut c = next;
        loop {
            let count = binomial(n - c - 1, k - pos - 1);
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    out
}

/// Brute-force minimum over every binary design with `α · N` cells.
pub fn exhaustive_oracle(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    alpha: f64,
    mode: OracleMode,
    opts: &SolverOptions,
) -> Result<DesignResult> {
    exhaustive_oracle_with(seminorm, grid, alpha, mode, opts, Execution::default())
}

pub fn exhaustive_oracle_with(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    alpha: f64,
    mode: OracleMode,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<DesignResult> {
    opts.validate()?;
    check_len(grid.len(), seminorm.len())?;
    let n = grid.len();
    let k = binary_cell_count(alpha, n)?;
    let count = binomial(n, k);
    if count > ORACLE_BUDGET {
        return Err(Error::Budget {
            count,
            limit: ORACLE_BUDGET,
        });
    }
    let lambdas = map_indexed(count as usize, exec, |r| {
        let cells = unrank_combination(r as u128, n, k);
        let d = DesignVector::from_cells(grid, &cells)?;
        let e = match mode {
            OracleMode::Hard => solve_hard(seminorm, grid, &d, opts)?,
            OracleMode::Soft(sigma) => solve_soft(seminorm, grid, &d, sigma, opts)?,
        };
        Ok::<_, Error>(e.lambda)
    });
    let lambdas: Vec<f64> = lambdas.into_iter().collect::<Result<_>>()?;
    let min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let tie = min + 1e-12 * min.abs().max(1.0);
    let rank = lambdas
        .iter()
        .position(|&l| l <= tie)
        .expect("at least one design");
    let design = DesignVector::from_cells(grid, &unrank_combination(rank as u128, n, k))?;
    let extremal = match mode {
        OracleMode::Hard => solve_hard(seminorm, grid, &design, opts)?,
        OracleMode::Soft(sigma) => solve_soft(seminorm, grid, &design, sigma, opts)?,
    };
    Ok(DesignResult {
        lambda: extremal.lambda,
        extremal,
        design,
        outer_iterations: count as usize,
        objective_trace: vec![lambdas[rank]],
        cycle_detected: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Domain};
    use crate::kernel::assemble_kernel;

    fn grid(n: usize) -> Grid {
        build_grid(&Domain::interval(0.0, 1.0).unwrap(), &[n]).unwrap()
    }

    #[test]
    fn bathtub_examples() {
        let g = grid(4);
        let u = [0.1, 0.5, 0.9, 1.2];
        let d = bathtub_update(&u, 0.25, &g, BathtubMode::Relaxed).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0, 0.0, 0.0]);
        let d = bathtub_update(&u, 0.375, &g, BathtubMode::Relaxed).unwrap();
        assert_eq!(d.values(), &[1.0, 0.5, 0.0, 0.0]);
        assert!(d.in_class(0.375, &g));
        let d = bathtub_update(&u, 0.25, &g, BathtubMode::Binary).unwrap();
        assert_eq!(d.cells(), vec![0]);
    }

    #[test]
    fn bathtub_uses_absolute_values_and_index_ties() {
        let g = grid(5);
        let u = [0.3, -0.1, 0.1, 2.0, -0.3];
        let d = bathtub_update(&u, 0.4, &g, BathtubMode::Binary).unwrap();
        assert_eq!(d.cells(), vec![1, 2]);
        let d = bathtub_update(&u, 0.6, &g, BathtubMode::Binary).unwrap();
        assert_eq!(d.cells(), vec![0, 1, 2]);
    }

    #[test]
    fn binary_requires_integral_count() {
        let g = grid(10);
        let err = bathtub_update(&[1.0; 10], 0.25, &g, BathtubMode::Binary).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha") && msg.contains("0.2"), "{msg}");
        assert!(bathtub_update(&[1.0; 10], 0.25, &g, BathtubMode::Relaxed).is_ok());
        assert!(bathtub_update(&[1.0; 10], 0.0, &g, BathtubMode::Relaxed).is_err());
        assert!(bathtub_update(&[f64::NAN; 10], 0.3, &g, BathtubMode::Relaxed).is_err());
    }

    #[test]
    fn combinations_enumerate_in_order() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
        let all: Vec<Vec<usize>> = (0..10).map(|r| unrank_combination(r, 5, 2)).collect();
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[3], vec![0, 4]);
        assert_eq!(all[4], vec![1, 2]);
        assert_eq!(all[9], vec![3, 4]);
    }

    #[test]
    fn oracle_two_cell_tie_prefers_cell_zero() {
        let g = grid(2);
        let k = assemble_kernel(&g, 0.5, 2.0).unwrap();
        let r = exhaustive_oracle(&k, &g, 0.5, OracleMode::Hard, &SolverOptions::default())
            .unwrap();
        assert!((r.lambda - 2.0).abs() < 1e-12);
        assert_eq!(r.design.cells(), vec![0]);
    }

    #[test]
    fn oracle_refuses_over_budget() {
        let g = grid(40);
        let k = assemble_kernel(&g, 0.5, 2.0).unwrap();
        match exhaustive_oracle(&k, &g, 0.5, OracleMode::Hard, &SolverOptions::default()) {
            Err(Error::Budget { count, .. }) => assert_eq!(count, binomial(40, 20)),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn hard_optimum_structure() {
        let g = grid(10);
        let k = assemble_kernel(&g, 0.5, 2.0).unwrap();
        let r = optimize_hard(&k, &g, 0.3, &SolverOptions::default()).unwrap();
        assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.design.in_class(0.3, &g));
        let zeros: Vec<usize> = (0..10).filter(|&i| r.extremal.u[i] == 0.0).collect();
        assert_eq!(zeros, r.design.cells());
        assert!(!r.cycle_detected);
    }

    #[test]
    fn soft_optimum_has_bathtub_shape() {
        let g = grid(10);
        let k = assemble_kernel(&g, 0.5, 2.0).unwrap();
        let r = optimize_soft(&k, &g, 0.35, 40.0, &SolverOptions::default()).unwrap();
        assert!(r.design.fractional_cells().len() <= 1);
        assert!(r.design.cells().len() >= 3);
        assert!(r.design.in_class(0.35, &g));
        assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn soft_vanishing_sigma_is_nearly_constant() {
        let g = grid(10);
        let k = assemble_kernel(&g, 0.5, 2.0).unwrap();
        let r = optimize_soft(&k, &g, 0.3, 1e-8, &SolverOptions::default()).unwrap();
        assert!(r.lambda <= 1e-8 * 0.3 + 1e-15);
        let c = r.extremal.u[0];
        assert!(r.extremal.u.iter().all(|x| (x - c).abs() < 1e-4));
    }

    #[test]
    fn rejects_bad_initial_design() {
        let g = grid(10);
        let k = assemble_kernel(&g, 0.5, 2.0).unwrap();
        let d = DesignVector::from_cells(&g, &[0, 1]).unwrap();
        let err = optimize_hard_from(&k, &g, 0.3, &SolverOptions::default(), Some(d));
        assert!(matches!(err, Err(Error::Constraint(_))));
    }
}
