//! Limit experiments: penalty continuation σ → ∞ and the s ↑ 1 scaling of the
//! hard optimum against the local p-Dirichlet problem.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::design::{optimize_hard, optimize_soft_from, DesignResult, DesignVector};
use crate::eigensolver::SolverOptions;
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::kernel::{
    assemble_kernel_with, check_sp, gagliardo_energy, local_energy, LocalDirichlet, Quadrature,
    Seminorm,
};
use crate::par::Execution;

/// Trapezoid points for the circle average.
pub const SPHERE_POINTS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KMethod {
    Gamma,
    Sphere,
}

/// Surface average of `|z_n|^p` over the unit sphere `S^{n−1}`.
///
/// `Gamma` evaluates `Γ(n/2) Γ((p+1)/2) / (√π Γ((n+p)/2))`. `Sphere` averages
/// directly: the two points of `S⁰`, a smoothed trapezoid rule on `S¹`, and
/// Archimedes' projection `½∫_{−1}^{1} |t|^p dt` on `S²`. By rotation
/// invariance any fixed unit direction gives the same value.
pub fn compute_k(n: usize, p: f64, method: KMethod) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("p must satisfy 1 < p < ∞, got {p}")));
    }
    match method {
        KMethod::Gamma => {
            let n = n as f64;
            Ok(gamma(n / 2.0) * gamma((p + 1.0) / 2.0) / (PI.sqrt() * gamma((n + p) / 2.0)))
        }
        KMethod::Sphere => match n {
            1 => Ok(0.5 * (1f64.powf(p) + (-1f64).abs().powf(p))),
            2 => Ok(circle_average(p)),
            3 => Ok(1.0 / (p + 1.0)),
            _ => Err(Error::Unsupported(format!(
                "sphere average for n = {n}; use the gamma method"
            ))),
        },
    }
}

/// `(1/2π) ∫ |sin θ|^p dθ` as `(2/π) ∫_0^{π/2} sin^p θ dθ`, with the
/// substitution `θ = (π/2)(t − sin(2πt)/2π)` flattening the `θ^p` endpoint
/// behaviour before the trapezoid rule.
fn circle_average(p: f64) -> f64 {
    let m = SPHERE_POINTS;
    let sum: f64 = (1..m)
        .map(|k| {
            let t = k as f64 / m as f64;
            let theta = 0.5 * PI * (t - (2.0 * PI * t).sin() / (2.0 * PI));
            let jac = 0.5 * PI * (1.0 - (2.0 * PI * t).cos());
            theta.sin().powf(p) * jac
        })
        .sum();
    // Endpoint t = 1 contributes sin^p(π/2)·0 = 0, as does t = 0.
    2.0 / PI * sum / m as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRecord {
    pub sigma: f64,
    pub lambda: f64,
    /// `Σ φ |u|^p h^n` of the optimal pair (penalty without σ).
    pub penalty_residual: f64,
    pub result: DesignResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationLadder {
    pub sigma_values: Vec<f64>,
    pub records: Vec<LadderRecord>,
    /// Hard optimum on the same grid, the σ → ∞ reference.
    pub hard: DesignResult,
}

impl ContinuationLadder {
    pub fn hard_lambda(&self) -> f64 {
        self.hard.lambda
    }

    /// λ(σ) never decreases by more than `tol` along the ladder.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].lambda >= w[0].lambda - tol)
    }

    /// Rungs violating `λ(σ) ≤ Λ` or `residual ≤ Λ/σ`, given a relative slack.
    pub fn bound_violations(&self, rtol: f64) -> Vec<f64> {
        let hard = self.hard.lambda;
        let slack = rtol * hard.max(1.0);
        self.records
            .iter()
            .filter(|r| r.lambda > hard + slack || r.penalty_residual > (hard + slack) / r.sigma)
            .map(|r| r.sigma)
            .collect()
    }
}

/// Soft optima along an increasing σ ladder, each warm-started from the
/// previous optimal pair.
pub fn sigma_continuation(
    seminorm: &dyn Seminorm,
    grid: &Grid,
    alpha: f64,
    sigma_values: &[f64],
    opts: &SolverOptions,
) -> Result<ContinuationLadder> {
    if sigma_values.is_empty() {
        return Err(Error::config("sigma_values", "ladder is empty"));
    }
    if sigma_values.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::config("sigma_values", "every σ must be positive and finite"));
    }
    if sigma_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("sigma_values", "ladder must be strictly increasing"));
    }
    let hard = optimize_hard(seminorm, grid, alpha, opts)?;

    let mut records: Vec<LadderRecord> = Vec::with_capacity(sigma_values.len());
    let mut design: Option<DesignVector> = None;
    let mut warm: Option<Vec<f64>> = None;
    for &sigma in sigma_values {
        let result = optimize_soft_from(
            seminorm,
            grid,
            alpha,
            sigma,
            opts,
            design.take(),
            warm.as_deref(),
        )?;
        design = Some(result.design.clone());
        warm = Some(result.extremal.u.clone());
        records.push(LadderRecord {
            sigma,
            lambda: result.lambda,
            penalty_residual: result.extremal.breakdown.penalty_term / sigma,
            result,
        });
    }
    Ok(ContinuationLadder {
        sigma_values: sigma_values.to_vec(),
        records,
        hard,
    })
}

/// Smooth test functions sampled at cell centres.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Constant,
    /// `x₁`.
    Linear,
    /// `cos(π x₁)`.
    CosPi,
}

impl Profile {
    pub fn sample(self, grid: &Grid) -> Vec<f64> {
        grid.centers()
            .iter()
            .map(|c| match self {
                Profile::Constant => 1.0,
                Profile::Linear => c[0],
                Profile::CosPi => (PI * c[0]).cos(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbmRow {
    pub s: f64,
    /// `(1 − s) [u]^p`.
    pub scaled_seminorm: f64,
    /// `K(n, p) Σ |∂_h u|^p h^n`.
    pub target: f64,
    /// `None` when both sides vanish.
    pub ratio: Option<f64>,
}

/// Compares `(1 − s)[u]^p` with `K(n, p)‖∇u‖_p^p` for a fixed profile.
///
/// For `n = 1, p = 2` the pointwise limit constant is exactly `K(1, 2) = 1`;
/// in general it carries the extra factor `|S^{n−1}| / p`.
pub fn bbm_pointwise_check(
    profile: Profile,
    grid: &Grid,
    p: f64,
    s_values: &[f64],
    quadrature: Quadrature,
) -> Result<Vec<BbmRow>> {
    check_s_values(s_values)?;
    let u = profile.sample(grid);
    let k = compute_k(grid.dim(), p, KMethod::Gamma)?;
    let target = k * local_energy(&u, grid, p)?;
    s_values
        .iter()
        .map(|&s| {
            let kernel = assemble_kernel_with(grid, s, p, quadrature, Execution::for_len(grid.len()))?;
            let scaled = (1.0 - s) * gagliardo_energy(&u, &kernel)?;
            let ratio = if target == 0.0 && scaled == 0.0 {
                None
            } else {
                Some(scaled / target)
            };
            Ok(BbmRow {
                s,
                scaled_seminorm: scaled,
                target,
                ratio,
            })
        })
        .collect()
}

fn check_s_values(s_values: &[f64]) -> Result<()> {
    if s_values.is_empty() {
        return Err(Error::config("s_values", "no s values given"));
    }
    for &s in s_values {
        check_sp(s, 2.0).map_err(|_| Error::config("s_values", format!("s must satisfy 0 < s < 1, got {s}")))?;
    }
    if s_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("s_values", "values must be strictly increasing"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaLimitRecord {
    pub s: f64,
    /// `(1 − s) Λ_s(α)`.
    pub scaled_lambda: f64,
    /// `Λ(α)` of the local problem.
    pub local_lambda: f64,
    pub k: f64,
    /// `scaled_lambda / (k · local_lambda)`.
    pub ratio: f64,
    /// Cells where `A_s` and the local optimal set differ, minimised over the
    /// symmetries of the nonlocal energy.
    pub symmetric_difference: usize,
    pub result: DesignResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaLimitOutcome {
    pub local: DesignResult,
    pub records: Vec<GammaLimitRecord>,
}

/// Hard optima for each `s`, scaled by `1 − s`, against the local optimum.
pub fn gamma_limit_experiment(
    grid: &Grid,
    p: f64,
    alpha: f64,
    s_values: &[f64],
    quadrature: Quadrature,
    opts: &SolverOptions,
) -> Result<GammaLimitOutcome> {
    check_s_values(s_values)?;
    let local_energy = LocalDirichlet::new(grid, p)?;
    let local = optimize_hard(&local_energy, grid, alpha, opts)?;
    let k = compute_k(grid.dim(), p, KMethod::Gamma)?;

    let records = s_values
        .iter()
        .map(|&s| {
            let kernel = assemble_kernel_with(grid, s, p, quadrature, Execution::for_len(grid.len()))?;
            let result = optimize_hard(&kernel, grid, alpha, opts)?;
            let symmetric_difference = kernel
                .symmetries()
                .iter()
                .map(|perm| result.design.permuted(perm).symmetric_difference(&local.design))
                .min()
                .unwrap_or(usize::MAX);
            let scaled_lambda = (1.0 - s) * result.lambda;
            Ok(GammaLimitRecord {
                s,
                scaled_lambda,
                local_lambda: local.lambda,
                k,
                ratio: scaled_lambda / (k * local.lambda),
                symmetric_difference,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GammaLimitOutcome { local, records })
}
