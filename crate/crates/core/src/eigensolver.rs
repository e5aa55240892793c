//! Extremals of the hard and soft Rayleigh quotients.
//!
//! Hard: `min ½E(u) / ‖u‖_p^p` over cell vectors vanishing on the obstacle,
//! with the obstacle cells removed from the unknowns.
//! Soft: `min (½E(u) + σ Σ φ|u|^p h^n) / ‖u‖_p^p` over all cell vectors.
//!
//! For `p = 2` the quotient is a symmetric pencil `(Q + σhΦ, hI)` and the
//! default backend is a dense symmetric eigendecomposition. Any `p` can use
//! [`minimize_quotient`], projected gradient descent on the unit `L^p` sphere
//! with Armijo backtracking.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::DesignVector;
use crate::error::{check_len, Error, Result};
use crate::geometry::Grid;
use crate::kernel::{lp_mass_weighted, EnergyBreakdown, Seminorm};

const ARMIJO_C: f64 = 1e-4;
const NOISE_AMPLITUDE: f64 = 1e-3;
/// Relative increase of the quotient tolerated once the Armijo decrease is
/// below rounding error.
pub const ROUNDOFF_SLACK: f64 = 16.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum P2Mode {
    /// Dense symmetric eigendecomposition when `p = 2`.
    #[default]
    Exact,
    /// Always use the projected-gradient backend.
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub tol_lambda: f64,
    pub tol_residual: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub p2_mode: P2Mode,
    /// Outer alternation/exchange steps for the design optimisers.
    pub max_outer_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_lambda: 1e-9,
            tol_residual: 1e-7,
            max_iterations: 50_000,
            seed: 0,
            p2_mode: P2Mode::Exact,
            max_outer_iterations: 1_000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_lambda > 0.0) {
            return Err(Error::config("solver.tol_lambda", "must be positive"));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::config("solver.tol_residual", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("solver.max_iterations", "must be at least 1"));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::config("solver.max_outer_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// A normalised, nonnegative minimiser of a Rayleigh quotient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremal {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub iterations: usize,
    /// `‖∇(numerator) − λ∇(mass)‖_∞` over the unknowns, at `‖u‖_p = 1`.
    pub el_residual: f64,
    pub breakdown: EnergyBreakdown,
}

/// Numerator/denominator callbacks for [`minimize_quotient`].
pub trait RayleighObjective {
    fn dim(&self) -> usize;

    fn p(&self) -> f64;

    /// Measure attached to each unknown in the `L^p` mass.
    fn weight(&self) -> f64;

    /// `(seminorm term, penalty term)` of the numerator.
    fn split(&self, v: &[f64]) -> (f64, f64);

    fn numerator_gradient(&self, v: &[f64], out: &mut [f64]);

    fn numerator(&self, v: &[f64]) -> f64 {
        let (a, b) = self.split(v);
        a + b
    }

    fn mass(&self, v: &[f64]) -> f64 {
        lp_mass_weighted(v, self.weight(), self.p())
    }
}

/// Seeded initial guess `1 + 10⁻³·U[0,1)`.
pub fn initial_guess(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| 1.0 + NOISE_AMPLITUDE * rng.random::<f64>())
        .collect()
}

fn normalize(v: &mut [f64], mass: f64, p: f64) {
    let scale = mass.powf(-1.0 / p);
    v.iter_mut().for_each(|x| *x *= scale);
}

fn mass_gradient(v: &[f64], p: f64, w: f64, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(v) {
        *o = p * x.abs().powf(p - 1.0) * x.signum() * w;
    }
}

/// Gradient of the quotient at a normalised point, i.e. the Euler–Lagrange
/// residual vector `∇N − λ∇M`.
fn quotient_gradient<O: RayleighObjective + ?Sized>(
    obj: &O,
    v: &[f64],
    lambda: f64,
    out: &mut [f64],
    scratch: &mut [f64],
) {
    obj.numerator_gradient(v, out);
    mass_gradient(v, obj.p(), obj.weight(), scratch);
    for (o, m) in out.iter_mut().zip(scratch.iter()) {
        *o -= lambda * m;
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Builds the extremal for a converged reduced vector (sign-normalised and
/// renormalised).
fn finish<O: RayleighObjective + ?Sized>(obj: &O, v: &[f64], iterations: usize) -> Extremal {
    let p = obj.p();
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let mass = obj.mass(&u);
    normalize(&mut u, mass, p);
    let (seminorm_term, penalty_term) = obj.split(&u);
    let breakdown = EnergyBreakdown {
        seminorm_term,
        penalty_term,
        mass: obj.mass(&u),
    };
    let lambda = breakdown.rayleigh();
    let mut g = vec![0.0; u.len()];
    let mut scratch = vec![0.0; u.len()];
    quotient_gradient(obj, &u, lambda, &mut g, &mut scratch);
    Extremal {
        lambda,
        el_residual: sup_norm(&g),
        u,
        iterations,
        breakdown,
    }
}

/// Projected gradient descent on `‖v‖_p = 1` with Armijo backtracking.
pub fn minimize_quotient<O: RayleighObjective + ?Sized>(
    obj: &O,
    initial: &[f64],
    opts: &SolverOptions,
) -> Result<Extremal> {
    minimize_quotient_traced(obj, initial, opts).map(|(e, _)| e)
}

/// As [`minimize_quotient`], also returning the quotient after every accepted
/// step (the first entry is the initial value).
pub fn minimize_quotient_traced<O: RayleighObjective + ?Sized>(
    obj: &O,
    initial: &[f64],
    opts: &SolverOptions,
) -> Result<(Extremal, Vec<f64>)> {
    opts.validate()?;
    let n = obj.dim();
    check_len(n, initial.len())?;
    let p = obj.p();

    let mut v = initial.to_vec();
    let mass = obj.mass(&v);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Parameter(
            "initial guess must have positive finite L^p mass".into(),
        ));
    }
    normalize(&mut v, mass, p);

    let mut scratch = vec![0.0; n];
    let mut lambda = obj.numerator(&v);
    let mut grad = vec![0.0; n];
    quotient_gradient(obj, &v, lambda, &mut grad, &mut scratch);
    let mut trace = vec![lambda];

    let mut step = 1.0 / sup_norm(&grad).max(1e-300) * 1e-2;
    let mut trial = vec![0.0; n];
    let mut new_grad = vec![0.0; n];

    for iter in 1..=opts.max_iterations {
        let g_sq: f64 = grad.iter().map(|g| g * g).sum();
        let g_sup = sup_norm(&grad);
        let v_sup = sup_norm(&v);

        // Backtracking line search along −∇R followed by retraction.
        let accepted = loop {
            if step * g_sup <= 1e-15 * v_sup {
                break None;
            }
            for ((t, x), g) in trial.iter_mut().zip(&v).zip(&grad) {
                *t = x - step * g;
            }
            let m = obj.mass(&trial);
            if m > 0.0 && m.is_finite() {
                normalize(&mut trial, m, p);
                let candidate = obj.numerator(&trial);
                let expected = step * g_sq;
                let ok = if expected > ROUNDOFF_SLACK * lambda.abs() {
                    candidate <= lambda - ARMIJO_C * expected
                } else {
                    // Below roundoff the quotient cannot rank the points;
                    // require a smaller residual instead.
                    candidate <= lambda + ROUNDOFF_SLACK * lambda.abs() && {
                        quotient_gradient(obj, &trial, candidate, &mut new_grad, &mut scratch);
                        new_grad.iter().map(|g| g * g).sum::<f64>() < g_sq
                    }
                };
                if ok {
                    break Some(candidate);
                }
            }
            step *= 0.5;
        };

        let Some(new_lambda) = accepted else {
            if g_sup <= opts.tol_residual {
                return Ok((finish(obj, &v, iter - 1), trace));
            }
            return Err(Error::NonConvergence {
                message: format!(
                    "line search failed at iteration {iter} with residual {g_sup:.3e} \
                     (tolerance {:.3e})",
                    opts.tol_residual
                ),
                last: Some(Box::new(finish(obj, &v, iter - 1))),
            });
        };
        debug_assert!(new_lambda <= lambda + ROUNDOFF_SLACK * lambda.abs());

        quotient_gradient(obj, &trial, new_lambda, &mut new_grad, &mut scratch);

        // Barzilai–Borwein trial step for the next iteration.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - v[i];
            let y = new_grad[i] - grad[i];
            ss += s * s;
            sy += s * y;
        }
        step = if sy > 0.0 { ss / sy } else { step * 2.0 };

        let change = (new_lambda - lambda).abs();
        std::mem::swap(&mut v, &mut trial);
        std::mem::swap(&mut grad, &mut new_grad);
        lambda = new_lambda;
        trace.push(lambda);

        if change <= opts.tol_lambda * lambda.max(1.0) && sup_norm(&grad) <= opts.tol_residual {
            return Ok((finish(obj, &v, iter), trace));
        }
    }

    Err(Error::NonConvergence {
        message: format!(
            "no convergence within {} iterations (residual {:.3e})",
            opts.max_iterations,
            sup_norm(&grad)
        ),
        last: Some(Box::new(finish(obj, &v, opts.max_iterations))),
    })
}

/// Quotient restricted to a subset of cells (the rest held at zero), with an
/// optional potential term.
pub struct ObstacleObjective<'a> {
    seminorm: &'a dyn Seminorm,
    measure: f64,
    free: Vec<usize>,
    potential: Option<(&'a [f64], f64)>,
}

impl<'a> ObstacleObjective<'a> {
    pub fn hard(seminorm: &'a dyn Seminorm, grid: &Grid, free: Vec<usize>) -> Self {
        ObstacleObjective {
            seminorm,
            measure: grid.cell_measure(),
            free,
            potential: None,
        }
    }

    pub fn soft(seminorm: &'a dyn Seminorm, grid: &Grid, phi: &'a [f64], sigma: f64) -> Self {
        ObstacleObjective {
            seminorm,
            measure: grid.cell_measure(),
            free: (0..seminorm.len()).collect(),
            potential: Some((phi, sigma)),
        }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.seminorm.len()];
        for (&i, &x) in self.free.iter().zip(v) {
            full[i] = x;
        }
        full
    }

    /// The reduced `p = 2` pencil `(Q_r + σhΦ_r) / h`, if available.
    fn p2_matrix(&self) -> Option<DMatrix<f64>> {
        let q = self.seminorm.half_energy_matrix()?;
        let k = self.free.len();
        let h = self.measure;
        Some(DMatrix::from_fn(k, k, |a, b| {
            let mut x = q[(self.free[a], self.free[b])];
            if a == b {
                if let Some((phi, sigma)) = self.potential {
                    x += sigma * h * phi[self.free[a]];
                }
            }
            x / h
        }))
    }
}

impl RayleighObjective for ObstacleObjective<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn p(&self) -> f64 {
        self.seminorm.exponent()
    }

    fn weight(&self) -> f64 {
        self.measure
    }

    fn split(&self, v: &[f64]) -> (f64, f64) {
        let seminorm = 0.5 * self.seminorm.energy(&self.expand(v));
        let penalty = match self.potential {
            Some((phi, sigma)) if sigma > 0.0 => {
                let p = self.p();
                let terms: Vec<f64> = self
                    .free
                    .iter()
                    .zip(v)
                    .map(|(&i, x)| phi[i] * x.abs().powf(p))
                    .collect();
                sigma * crate::par::pairwise_sum(&terms) * self.measure
            }
            _ => 0.0,
        };
        (seminorm, penalty)
    }

    fn numerator_gradient(&self, v: &[f64], out: &mut [f64]) {
        let full = self.expand(v);
        let mut g = vec![0.0; full.len()];
        self.seminorm.gradient_into(&full, &mut g);
        let p = self.p();
        for ((o, &i), &x) in out.iter_mut().zip(&self.free).zip(v) {
            *o = 0.5 * g[i];
            if let Some((phi, sigma)) = self.potential {
                *o += sigma * phi[i] * p * x.abs().powf(p - 1.0) * x.signum() * self.measure;
            }
        }
    }
}

fn exact_p2(obj: &ObstacleObjective<'_>) -> Option<Extremal> {
    let m = obj.p2_matrix()?;
    let eig = SymmetricEigen::new(m);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    Some(finish(obj, &v, 1))
}

fn use_exact(seminorm: &dyn Seminorm, opts: &SolverOptions) -> bool {
    seminorm.exponent() == 2.0 && opts.p2_mode == P2Mode::Exact
}

fn solve_objective(
    obj: &ObstacleObjective<'_>,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<Extremal> {
    opts.validate()?;
    let reduced = if use_exact(obj.seminorm, opts) {
        exact_p2(obj)
    } else {
        None
    };
    let reduced = match reduced {
        Some(e) => e,
        None => {
            let init = match warm {
                Some(w) => {
                    let v: Vec<f64> = obj.free.iter().map(|&i| w[i].abs()).collect();
                    if v.iter().any(|&x| x > 0.0) {
                        v
                    } else {
                        initial_guess(obj.dim(), opts.seed)
                    }
                }
                None => initial_guess(obj.dim(), opts.seed),
            };
            minimize_quotient(obj, &init, opts).map_err(|e| expand_error(obj, e))?
        }
    };
    Ok(Extremal {
        u: obj.expand(&reduced.u),
        ..reduced
    })
}

fn expand_error(obj: &ObstacleObjective<'_>, err: Error) -> Error {
    match err {
        Error::NonConvergence { message, last } => Error::NonConvergence {
            message,
            last: last.map(|e| {
                Box::new(Extremal {
                    u: obj.expand(&e.u),
                    ..*e
                })
            }),
        },
        other => other,
    }
}

/// Hard-obstacle extremal: `u = 0` on the cells of the binary design `obstacle`.
pub fn solve_hard(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    obstacle: &DesignVector,
    opts: &SolverOptions,
) -> Result<Extremal> {
    solve_hard_from(seminorm, grid, obstacle, opts, None)
}

/// [`solve_hard`] with an optional warm start for the iterative backend.
pub fn solve_hard_from(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    obstacle: &DesignVector,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<Extremal> {
    check_len(grid.len(), seminorm.len())?;
    check_len(grid.len(), obstacle.len())?;
    if !obstacle.is_binary() {
        return Err(Error::Constraint(
            "hard obstacle must be a binary design (values in {0, 1})".into(),
        ));
    }
    let free: Vec<usize> = (0..grid.len())
        .filter(|&i| obstacle.values()[i] == 0.0)
        .collect();
    if free.len() == grid.len() {
        return Err(Error::Constraint("obstacle is empty: |A| must be positive".into()));
    }
    if free.is_empty() {
        return Err(Error::Constraint(
            "obstacle covers the whole domain: |A| must be smaller than |Ω|".into(),
        ));
    }
    let obj = ObstacleObjective::hard(seminorm, grid, free);
    solve_objective(&obj, opts, warm)
}

/// Soft-obstacle extremal for the potential `phi` with penalty weight `sigma`.
pub fn solve_soft(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    phi: &DesignVector,
    sigma: f64,
    opts: &SolverOptions,
) -> Result<Extremal> {
    solve_soft_from(seminorm, grid, phi, sigma, opts, None)
}

pub fn solve_soft_from(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    phi: &DesignVector,
    sigma: f64,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<Extremal> {
    check_len(grid.len(), seminorm.len())?;
    check_len(grid.len(), phi.len())?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must satisfy σ ≥ 0, got {sigma}")));
    }
    let p = seminorm.exponent();
    if sigma == 0.0 || phi.values().iter().all(|&x| x == 0.0) {
        // Constants have zero energy and no penalty.
        let c = grid.domain().measure().powf(-1.0 / p);
        let u = vec![c; grid.len()];
        let mass = lp_mass_weighted(&u, grid.cell_measure(), p);
        return Ok(Extremal {
            lambda: 0.0,
            u,
            iterations: 0,
            el_residual: 0.0,
            breakdown: EnergyBreakdown {
                seminorm_term: 0.0,
                penalty_term: 0.0,
                mass,
            },
        });
    }
    let obj = ObstacleObjective::soft(seminorm, grid, phi.values(), sigma);
    solve_objective(&obj, opts, warm)
}
