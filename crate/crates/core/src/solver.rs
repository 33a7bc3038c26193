//! Backward-Euler time marching with a monolithic or a staggered Newton scheme.
//!
//! Unknowns are scaled internally by their characteristic magnitudes so that the
//! growth factors (~1e-15 mol/mm³) and the SMC density (~1e5 cells/mm³) enter
//! the linear systems and the convergence test on equal footing.

use std::time::Instant;

use crate::assembly::{Layout, Model, State, JN_COMPONENT};
use crate::error::{Error, Result};
use crate::linalg::{apply_dirichlet, DirectSolver, FactorReuse, Factorization};

/// How the coupled step is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeScheme {
    /// One Newton loop on all seven nodal fields.
    Monolithic,
    /// Four linear species solves on the lagged geometry, then a displacement Newton loop.
    Staggered,
}

impl TimeScheme {
    pub fn name(self) -> &'static str {
        match self {
            TimeScheme::Monolithic => "monolithic",
            TimeScheme::Staggered => "staggered",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "monolithic" => Some(TimeScheme::Monolithic),
            "staggered" => Some(TimeScheme::Staggered),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Field converged once its scaled residual falls below this fraction of its largest value.
    pub tol_rel: f64,
    /// Absolute floor on the scaled residual of a field.
    pub tol_abs: f64,
    /// Field also converged once its scaled increment is this small relative to the scaled state.
    pub tol_increment: f64,
    pub max_iterations: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol_rel: 1e-8,
            tol_abs: 1e-12,
            tol_increment: 1e-12,
            max_iterations: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub scheme: TimeScheme,
    pub dt: f64,
    pub t_end: f64,
    pub newton: NewtonSettings,
    /// Times a failed step is retried with half the step size.
    pub max_halvings: usize,
    /// Reuse the last coupled factorization as a preconditioner instead of
    /// factorizing every Newton iteration.
    pub reuse_factorization: bool,
}

impl SolverSettings {
    pub fn new(scheme: TimeScheme, dt: f64, t_end: f64) -> Self {
        SolverSettings {
            scheme,
            dt,
            t_end,
            newton: NewtonSettings::default(),
            max_halvings: 3,
            reuse_factorization: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("end time must be non-negative, got {}", self.t_end)));
        }
        if self.newton.max_iterations == 0 {
            return Err(Error::InvalidParameter("Newton needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Summary of one accepted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub t: f64,
    pub dt: f64,
    /// Newton iterations summed over all (sub)systems and substeps.
    pub iterations: usize,
    /// Largest number of halvings used by any part of this step.
    pub halvings: usize,
    /// Final scaled residual norms `[P, T, E, S, u]`.
    pub residuals: [f64; 5],
    /// Largest field residual relative to its peak, per iteration of the last Newton loop.
    pub history: Vec<f64>,
    pub wall_seconds: f64,
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub steps: usize,
    pub iterations: usize,
    pub halvings: usize,
    pub factorizations: usize,
    /// Linear solves answered by the preconditioned iterative path.
    pub iterative_solves: usize,
    pub negativity_warnings: usize,
}

struct Report {
    iterations: usize,
    residuals: [f64; 5],
    history: Vec<f64>,
}

/// Field slot of a nodal component in the residual-norm arrays; the auxiliary nodal J has none.
fn slot(comp: usize) -> Option<usize> {
    (comp != JN_COMPONENT).then_some(comp.min(4))
}

/// Time integrator bound to one model.
pub struct Simulator<'a> {
    pub model: &'a Model,
    pub settings: SolverSettings,
    pub stats: SolverStats,
    monolithic: DirectSolver,
    species: DirectSolver,
    displacement: DirectSolver,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a Model, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        // element work is already spread over threads; keep the factorization serial
        faer::set_global_parallelism(faer::Par::Seq);
        Ok(Simulator {
            model,
            settings,
            stats: SolverStats::default(),
            monolithic: if settings.reuse_factorization {
                DirectSolver::with_reuse(FactorReuse::default())
            } else {
                DirectSolver::new()
            },
            species: DirectSolver::new(),
            displacement: DirectSolver::new(),
        })
    }

    fn solver_for(&mut self, layout: Layout) -> &mut DirectSolver {
        match layout {
            Layout::Monolithic | Layout::Augmented => &mut self.monolithic,
            Layout::Species(_) => &mut self.species,
            Layout::Displacement => &mut self.displacement,
        }
    }

    /// Scaled Newton increment of one layout at `state`; the residual norms are returned alongside.
    fn increment(&mut self, layout: Layout, state: &State, old: &State, t_new: f64, dt: f64) -> Result<(Vec<f64>, [f64; 5])> {
        let model = self.model;
        let mut sys = model.assemble(layout, state, old, t_new, dt)?;
        let scales = model.dof_scales(layout);
        let dirichlet: Vec<(usize, f64)> = model
            .dirichlet(layout)
            .into_iter()
            .map(|(d, v)| (d, (v - model.gather_dof(layout, state, d)) / scales[d]))
            .collect();
        let mut rhs: Vec<f64> = sys.residual.iter().zip(&scales).map(|(r, s)| -r / s).collect();
        let mut norms = [0.0; 5];
        let mut fixed = vec![false; rhs.len()];
        for &(d, _) in &dirichlet {
            fixed[d] = true;
        }
        for (d, r) in rhs.iter().enumerate() {
            if let (false, Some(f)) = (fixed[d], slot(layout.component(d))) {
                norms[f] += r * r;
            }
        }
        for n in norms.iter_mut() {
            *n = n.sqrt();
        }
        sys.matrix.rescale(&scales, &scales);
        apply_dirichlet(&mut sys.matrix, &mut rhs, &dirichlet);
        let kind = match layout {
            Layout::Monolithic | Layout::Augmented => Factorization::Lu,
            _ if sys.matrix.relative_asymmetry() <= 1e-12 => Factorization::Cholesky,
            _ => Factorization::Lu,
        };
        let solver = self.solver_for(layout);
        let before = (solver.factorizations, solver.iterative_solves);
        let dx = match solver.solve(&sys.matrix, &rhs, kind) {
            Ok(dx) => dx,
            Err(_) if kind == Factorization::Cholesky => solver.solve(&sys.matrix, &rhs, Factorization::Lu)?,
            Err(e) => return Err(e),
        };
        let solver = self.solver_for(layout);
        let after = (solver.factorizations, solver.iterative_solves);
        self.stats.factorizations += after.0 - before.0;
        self.stats.iterative_solves += after.1 - before.1;
        Ok((dx.iter().zip(&scales).map(|(d, s)| d * s).collect(), norms))
    }

    fn apply(&self, layout: Layout, state: &mut State, dx: &[f64]) {
        let mut x = self.model.gather(layout, state);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        self.model.scatter(layout, &x, state);
    }

    /// Newton loop on one layout; at least one linear solve is always performed.
    fn newton(&mut self, layout: Layout, state: &mut State, old: &State, t_new: f64, dt: f64) -> Result<Report> {
        let newton = self.settings.newton;
        let scales = self.model.dof_scales(layout);
        let mut max_norms = [0.0f64; 5];
        let mut last_increment: Option<[f64; 5]> = None;
        let mut history = Vec::new();
        for k in 0..=newton.max_iterations {
            let (dx, norms) = self.increment(layout, state, old, t_new, dt)?;
            for (m, n) in max_norms.iter_mut().zip(&norms) {
                *m = m.max(*n);
            }
            history.push(
                (0..5)
                    .filter(|&f| max_norms[f] > 0.0)
                    .map(|f| norms[f] / max_norms[f])
                    .fold(0.0, f64::max),
            );
            if !norms.iter().all(|n| n.is_finite()) {
                return Err(Error::NoConvergence {
                    t: t_new,
                    iterations: k,
                    residual: f64::NAN,
                });
            }
            if k > 0 {
                let converged = (0..5).all(|f| {
                    norms[f] <= newton.tol_abs
                        || norms[f] <= newton.tol_rel * max_norms[f]
                        || last_increment.is_some_and(|inc| inc[f] <= newton.tol_increment)
                });
                if converged {
                    return Ok(Report {
                        iterations: k,
                        residuals: norms,
                        history,
                    });
                }
            }
            if k == newton.max_iterations {
                return Err(Error::NoConvergence {
                    t: t_new,
                    iterations: k,
                    residual: norms.iter().cloned().fold(0.0, f64::max),
                });
            }
            // relative scaled increment per field, measured against the scaled state
            let x = self.model.gather(layout, state);
            let mut inc = [0.0f64; 5];
            let mut mag = [1.0f64; 5];
            for (d, (&xi, &di)) in x.iter().zip(&dx).enumerate() {
                let Some(f) = slot(layout.component(d)) else {
                    continue;
                };
                inc[f] = inc[f].max((di / scales[d]).abs());
                mag[f] = mag[f].max((xi / scales[d]).abs());
            }
            for f in 0..5 {
                inc[f] /= mag[f];
            }
            last_increment = Some(inc);
            self.apply(layout, state, &dx);
        }
        unreachable!("loop returns on its last iteration")
    }

    /// One linear solve from the start-of-step values of a species.
    fn linear_species(&mut self, s: usize, state: &mut State, old: &State, t_new: f64, dt: f64) -> Result<[f64; 5]> {
        let layout = Layout::Species(s);
        let (dx, norms) = self.increment(layout, state, old, t_new, dt)?;
        self.apply(layout, state, &dx);
        Ok(norms)
    }

    fn try_step(&mut self, state: &State, dt: f64) -> Result<(State, Report)> {
        let t_new = state.t + dt;
        let mut next = state.clone();
        next.t = t_new;
        let report = match self.settings.scheme {
            TimeScheme::Monolithic => self.newton(Layout::Augmented, &mut next, state, t_new, dt)?,
            TimeScheme::Staggered => {
                // species on the geometry and co-species of the previous step
                let mut residuals = [0.0; 5];
                for s in 0..4 {
                    let mut lagged = state.clone();
                    let norms = self.linear_species(s, &mut lagged, state, t_new, dt)?;
                    next.species[s] = lagged.species[s].clone();
                    residuals[s] = norms[s];
                }
                let mech = self.newton(Layout::Displacement, &mut next, state, t_new, dt)?;
                residuals[4] = mech.residuals[4];
                Report {
                    iterations: 4 + mech.iterations,
                    residuals,
                    history: mech.history,
                }
            }
        };
        if !next.is_finite() {
            return Err(Error::NoConvergence {
                t: t_new,
                iterations: report.iterations,
                residual: f64::NAN,
            });
        }
        Ok((next, report))
    }

    /// Advances by `dt`, halving on failure up to the configured depth.
    fn advance(&mut self, state: &State, dt: f64, depth: usize) -> Result<(State, Report, usize)> {
        match self.try_step(state, dt) {
            Ok((s, r)) => Ok((s, r, depth)),
            Err(e) if depth < self.settings.max_halvings => {
                log::warn!("step at t = {} with dt = {dt} failed ({e}); halving", state.t);
                self.stats.halvings += 1;
                let half = 0.5 * dt;
                let (mid, r1, d1) = self.advance(state, half, depth + 1)?;
                let (mut end, r2, d2) = self.advance(&mid, half, depth + 1)?;
                end.t = state.t + dt;
                Ok((
                    end,
                    Report {
                        iterations: r1.iterations + r2.iterations,
                        residuals: r2.residuals,
                        history: r2.history,
                    },
                    d1.max(d2),
                ))
            }
            Err(e) if depth == 0 => Err(e),
            Err(e) => Err(Error::StepFailed {
                t: state.t,
                retries: depth,
                source: Box::new(e),
            }),
        }
    }

    /// One accepted step of nominal size `dt`.
    pub fn step(&mut self, state: &State, dt: f64) -> Result<(State, StepLog)> {
        let start = Instant::now();
        let (next, report, halvings) = self.advance(state, dt, 0)?;
        self.stats.steps += 1;
        self.stats.iterations += report.iterations;
        self.warn_negative(&next);
        Ok((
            next.clone(),
            StepLog {
                t: next.t,
                dt,
                iterations: report.iterations,
                halvings,
                residuals: report.residuals,
                history: report.history,
                wall_seconds: start.elapsed().as_secs_f64(),
            },
        ))
    }

    fn warn_negative(&mut self, state: &State) {
        for (s, values) in state.species.iter().enumerate() {
            let floor = -1e-3 * self.model.scales[s];
            if let Some(min) = values.iter().cloned().reduce(f64::min) {
                if min < floor {
                    self.stats.negativity_warnings += 1;
                    log::warn!("t = {}: species {s} has negative nodal value {min:e}", state.t);
                }
            }
        }
    }

    /// Marches from `initial` to `t_end`, calling `observer` after every accepted step.
    pub fn run(
        &mut self,
        initial: State,
        mut observer: impl FnMut(&State, &StepLog) -> Result<()>,
    ) -> Result<State> {
        let (dt, t_end) = (self.settings.dt, self.settings.t_end);
        let t0 = initial.t;
        let steps = ((t_end - t0) / dt - 1e-9).ceil().max(0.0) as usize;
        let mut state = initial;
        for k in 0..steps {
            let target = (t0 + (k + 1) as f64 * dt).min(t_end);
            let (next, log) = self.step(&state, target - state.t)?;
            state = next;
            state.t = target;
            log::debug!("t = {:.4} iterations {} residuals {:?}", log.t, log.iterations, log.residuals);
            observer(&state, &log)?;
        }
        Ok(state)
    }
}

/// Largest deviation of a time series from a reference, relative to the reference's excursion.
///
/// `series` is linearly interpolated onto the reference sample times.
pub fn relative_deviation(series: &[(f64, f64)], reference: &[(f64, f64)]) -> f64 {
    let Some(&(_, b0)) = reference.first() else {
        return 0.0;
    };
    let excursion = reference.iter().map(|&(_, b)| (b - b0).abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for &(t, b) in reference {
        worst = worst.max((interpolate(series, t) - b).abs());
    }
    if excursion == 0.0 {
        if worst == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        worst / excursion
    }
}

fn interpolate(series: &[(f64, f64)], t: f64) -> f64 {
    match series.iter().position(|&(ts, _)| ts >= t) {
        None => series.last().map_or(f64::NAN, |p| p.1),
        Some(0) => series[0].1,
        Some(i) => {
            let (t0, v0) = series[i - 1];
            let (t1, v1) = series[i];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}
