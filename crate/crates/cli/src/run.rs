use std::io::Write;
use std::path::Path;
use std::time::Instant;

use fracobstacle::config::RunConfig;
use fracobstacle::design::{exhaustive_oracle, optimize_hard, optimize_soft, DesignResult, OracleMode};
use fracobstacle::eigensolver::{solve_hard, solve_soft, Extremal};
use fracobstacle::geometry::Grid;
use fracobstacle::kernel::{assemble_kernel_with, KernelMatrix, Quadrature};
use fracobstacle::limits::{bbm_pointwise_check, gamma_limit_experiment, sigma_continuation, Profile};
use fracobstacle::par::Execution;
use fracobstacle::records::{design_checksum, emit_records, write_records, ExperimentRecord, RecordFormat};
use fracobstacle::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub enum Task {
    SolveHard,
    SolveSoft,
    OptimizeHard,
    OptimizeSoft,
    Oracle,
    Continuation,
    GammaLimit,
    BbmCheck,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::SolveHard => "solve-hard",
            Task::SolveSoft => "solve-soft",
            Task::OptimizeHard => "optimize-hard",
            Task::OptimizeSoft => "optimize-soft",
            Task::Oracle => "oracle",
            Task::Continuation => "continuation",
            Task::GammaLimit => "gamma-limit",
            Task::BbmCheck => "bbm-check",
        }
    }
}

struct Row<'a> {
    command: &'a str,
    s: f64,
    p: f64,
    alpha: Option<f64>,
    sigma: Option<f64>,
    grid: &'a Grid,
    seed: u64,
}

impl Row<'_> {
    fn extremal(&self, x: &Extremal, iterations: usize, design: &[f64], started: Instant) -> ExperimentRecord {
        ExperimentRecord {
            command: self.command.to_string(),
            s: self.s,
            p: self.p,
            alpha: self.alpha,
            sigma: self.sigma,
            n: self.grid.len(),
            lambda: x.lambda,
            seminorm_term: x.breakdown.seminorm_term,
            penalty_term: x.breakdown.penalty_term,
            iterations,
            el_residual: x.el_residual,
            design_checksum: design_checksum(design),
            seed: self.seed,
            wall_time_ms: started.elapsed().as_millis() as u64,
        }
    }

    fn design(&self, r: &DesignResult, started: Instant) -> ExperimentRecord {
        self.extremal(&r.extremal, r.outer_iterations, r.design.values(), started)
    }
}

fn kernel(config: &RunConfig, grid: &Grid, s: f64, p: f64, default: Quadrature) -> Result<KernelMatrix> {
    assemble_kernel_with(grid, s, p, config.quadrature_or(default), Execution::for_len(grid.len()))
}

/// Runs a validated configuration and returns its records.
pub fn execute(task: Task, config: &RunConfig) -> Result<Vec<ExperimentRecord>> {
    let started = Instant::now();
    let grid = config.grid()?;
    let opts = &config.solver;
    let command = task.as_str();
    let seed = opts.seed;
    let measure = grid.domain().measure();
    let row = |s: f64, p: f64, alpha: Option<f64>, sigma: Option<f64>| Row {
        command,
        s,
        p,
        alpha,
        sigma,
        grid: &grid,
        seed,
    };

    match task {
        Task::SolveHard => {
            let (s, p) = (config.s()?, config.p()?);
            let obstacle = config.obstacle_design(&grid)?;
            let k = kernel(config, &grid, s, p, Quadrature::Midpoint)?;
            let x = solve_hard(&k, &grid, &obstacle, opts)?;
            let alpha = config.alpha.unwrap_or(obstacle.mass() / measure);
            Ok(vec![row(s, p, Some(alpha), None).extremal(&x, x.iterations, obstacle.values(), started)])
        }
        Task::SolveSoft => {
            let (s, p, sigma) = (config.s()?, config.p()?, config.sigma()?);
            let phi = config.potential_design(&grid)?;
            let k = kernel(config, &grid, s, p, Quadrature::Midpoint)?;
            let x = solve_soft(&k, &grid, &phi, sigma, opts)?;
            let alpha = config.alpha.unwrap_or(phi.mass() / measure);
            Ok(vec![row(s, p, Some(alpha), Some(sigma)).extremal(&x, x.iterations, phi.values(), started)])
        }
        Task::OptimizeHard => {
            let (s, p, alpha) = (config.s()?, config.p()?, config.alpha()?);
            let k = kernel(config, &grid, s, p, Quadrature::Midpoint)?;
            let r = optimize_hard(&k, &grid, alpha, opts)?;
            report_design(&r);
            Ok(vec![row(s, p, Some(alpha), None).design(&r, started)])
        }
        Task::OptimizeSoft => {
            let (s, p, alpha, sigma) = (config.s()?, config.p()?, config.alpha()?, config.sigma()?);
            let k = kernel(config, &grid, s, p, Quadrature::Midpoint)?;
            let r = optimize_soft(&k, &grid, alpha, sigma, opts)?;
            report_design(&r);
            Ok(vec![row(s, p, Some(alpha), Some(sigma)).design(&r, started)])
        }
        Task::Oracle => {
            let (s, p, alpha) = (config.s()?, config.p()?, config.alpha()?);
            let mode = match config.sigma {
                Some(sigma) => OracleMode::Soft(sigma),
                None => OracleMode::Hard,
            };
            let k = kernel(config, &grid, s, p, Quadrature::Midpoint)?;
            let r = exhaustive_oracle(&k, &grid, alpha, mode, opts)?;
            report_design(&r);
            Ok(vec![row(s, p, Some(alpha), config.sigma).design(&r, started)])
        }
        Task::Continuation => {
            let (s, p, alpha) = (config.s()?, config.p()?, config.alpha()?);
            let sigmas = config.sigma_values()?;
            let k = kernel(config, &grid, s, p, Quadrature::Midpoint)?;
            let ladder = sigma_continuation(&k, &grid, alpha, sigmas, opts)?;
            let hard = ladder.hard_lambda();
            eprintln!("# hard optimum {hard:.12e}");
            eprintln!("# {:>12} {:>20} {:>20} {:>20}", "sigma", "lambda", "residual", "hard/sigma");
            for r in &ladder.records {
                eprintln!(
                    "# {:>12.4e} {:>20.12e} {:>20.12e} {:>20.12e}",
                    r.sigma,
                    r.lambda,
                    r.penalty_residual,
                    hard / r.sigma
                );
            }
            eprintln!(
                "# monotone: {}  bound violations: {:?}",
                ladder.is_monotone(1e-7),
                ladder.bound_violations(1e-9)
            );
            let mut out: Vec<ExperimentRecord> = ladder
                .records
                .iter()
                .map(|r| row(s, p, Some(alpha), Some(r.sigma)).design(&r.result, started))
                .collect();
            out.push(row(s, p, Some(alpha), None).design(&ladder.hard, started));
            Ok(out)
        }
        Task::GammaLimit => {
            let (p, alpha) = (config.p()?, config.alpha()?);
            let s_values = config.s_values()?;
            let outcome = gamma_limit_experiment(
                &grid,
                p,
                alpha,
                s_values,
                config.quadrature_or(Quadrature::Corrected),
                opts,
            )?;
            eprintln!("# local optimum {:.12e}", outcome.local.lambda);
            eprintln!("# {:>6} {:>20} {:>12} {:>8}", "s", "(1-s)lambda", "ratio", "symdiff");
            for r in &outcome.records {
                eprintln!(
                    "# {:>6.3} {:>20.12e} {:>12.6} {:>8}",
                    r.s, r.scaled_lambda, r.ratio, r.symmetric_difference
                );
            }
            let mut out: Vec<ExperimentRecord> = outcome
                .records
                .iter()
                .map(|r| row(r.s, p, Some(alpha), None).design(&r.result, started))
                .collect();
            // The local problem is the s = 1 end of the sweep.
            out.push(row(1.0, p, Some(alpha), None).design(&outcome.local, started));
            Ok(out)
        }
        Task::BbmCheck => {
            let p = config.p()?;
            let s_values = config.s_values()?;
            let profile = config.profile.unwrap_or(Profile::CosPi);
            let rows = bbm_pointwise_check(
                profile,
                &grid,
                p,
                s_values,
                config.quadrature_or(Quadrature::Corrected),
            )?;
            let u = profile.sample(&grid);
            Ok(rows
                .iter()
                .map(|b| ExperimentRecord {
                    command: command.to_string(),
                    s: b.s,
                    p,
                    alpha: None,
                    sigma: None,
                    n: grid.len(),
                    lambda: b.ratio.unwrap_or(f64::NAN),
                    seminorm_term: b.scaled_seminorm,
                    penalty_term: b.target,
                    iterations: 0,
                    el_residual: 0.0,
                    design_checksum: design_checksum(&u),
                    seed,
                    wall_time_ms: started.elapsed().as_millis() as u64,
                })
                .collect())
        }
    }
}

fn report_design(r: &DesignResult) {
    eprintln!(
        "# lambda {:.12e} after {} outer iterations; obstacle cells {:?}",
        r.lambda,
        r.outer_iterations,
        r.design.cells()
    );
}

pub fn emit(records: &[ExperimentRecord], out: Option<&Path>, format: RecordFormat) -> Result<()> {
    match out {
        Some(path) => emit_records(records, path, format),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_records(records, &mut lock, format)
                .and_then(|_| lock.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}
