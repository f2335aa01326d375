use std::time::Instant;

use serde::Serialize;

use super::loss::{Correspondences, GeometricLoss, WarpProblem};
use super::transforms::PartTransforms;
use crate::asset_io::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::LabeledPointSet;
use crate::optim::Adam;
use crate::part_field::Ellipsoid;

/// Relative loss change across one correspondence window below which the
/// solve stops early.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub total: f64,
    pub data: f64,
    pub ellipsoid: f64,
    pub symmetry_warp: f64,
    pub symmetry_ellipsoid: f64,
    /// True when correspondences were refreshed at this iteration, so the
    /// values are the exact loss rather than the frozen-assignment surrogate.
    pub exact: bool,
    /// Lowest exact total seen so far.
    pub best_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    IterationLimit,
    Converged,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerTrace {
    pub entries: Vec<TraceEntry>,
    pub iterations: usize,
    pub best_total: f64,
    pub stop_reason: StopReason,
    pub wall_time_s: f64,
}

impl OptimizerTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

/// Adam on the flat affine parameters with nearest-neighbor assignments
/// frozen between refreshes. Keeps the best exactly-evaluated iterate.
pub struct TransformSolver<'a> {
    problem: WarpProblem<'a>,
    params: Vec<f64>,
    adam: Adam,
    corr: Option<Correspondences>,
    refresh_every: usize,
    since_refresh: usize,
    iteration: usize,
    last_exact: Option<f64>,
    converged: bool,
    best: (f64, Vec<f64>),
}

impl<'a> TransformSolver<'a> {
    pub fn new(
        source: &'a LabeledPointSet,
        target: &'a LabeledPointSet,
        ells: &[Ellipsoid],
        cfg: &RunConfig,
    ) -> Result<Self> {
        let problem = WarpProblem::new(source, target, ells, cfg)?;
        let params = PartTransforms::identity(ells.len()).to_params();
        Ok(Self {
            adam: Adam::new(params.len(), cfg.geo_learning_rate),
            best: (f64::INFINITY, params.clone()),
            params,
            problem,
            corr: None,
            refresh_every: cfg.correspondence_refresh.max(1),
            since_refresh: 0,
            iteration: 0,
            last_exact: None,
            converged: false,
        })
    }

    pub fn problem(&self) -> &WarpProblem<'a> {
        &self.problem
    }

    pub fn transforms(&self) -> PartTransforms {
        PartTransforms::from_params(&self.params)
    }

    pub fn best_transforms(&self) -> PartTransforms {
        PartTransforms::from_params(&self.best.1)
    }

    pub fn best_total(&self) -> f64 {
        self.best.0
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    fn record_exact(&mut self, loss: &GeometricLoss) {
        if loss.total < self.best.0 {
            self.best = (loss.total, self.params.clone());
        }
    }

    /// One gradient step. Refreshes the assignments first when the window
    /// has elapsed; the returned entry describes the loss before the update.
    pub fn step(&mut self) -> Result<TraceEntry> {
        let t = self.transforms();
        let refresh = self.corr.is_none() || self.since_refresh >= self.refresh_every;
        if refresh {
            self.corr = Some(self.problem.correspondences(&t));
            self.since_refresh = 0;
        }
        let corr = self.corr.as_ref().expect("assignments present");
        let (loss, grad) = self.problem.frozen_loss_and_gradient(&t, corr);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite geometric loss at iteration {} (data {}, symmetry {}); best so far {}",
                self.iteration, loss.data, loss.symmetry_warp, self.best.0
            )));
        }
        if refresh {
            self.record_exact(&loss);
            if let Some(prev) = self.last_exact {
                let rel = (prev - loss.total).abs() / prev.abs().max(f64::MIN_POSITIVE);
                if rel < CONVERGENCE_TOLERANCE {
                    self.converged = true;
                }
            }
            self.last_exact = Some(loss.total);
        }
        let entry = TraceEntry {
            iteration: self.iteration,
            total: loss.total,
            data: loss.data,
            ellipsoid: loss.ellipsoid,
            symmetry_warp: loss.symmetry_warp,
            symmetry_ellipsoid: loss.symmetry_ellipsoid,
            exact: refresh,
            best_total: self.best.0,
        };
        self.adam.step(&mut self.params, &grad);
        self.since_refresh += 1;
        self.iteration += 1;
        Ok(entry)
    }

    /// Steps until converged or `max_iters` steps were taken, then folds the
    /// final iterate into the best.
    pub fn run(&mut self, max_iters: usize) -> Result<OptimizerTrace> {
        let start = Instant::now();
        let mut entries = Vec::with_capacity(max_iters);
        let mut stop_reason = StopReason::IterationLimit;
        for _ in 0..max_iters {
            entries.push(self.step()?);
            if self.converged {
                stop_reason = StopReason::Converged;
                break;
            }
        }
        self.finish()?;
        Ok(OptimizerTrace {
            iterations: entries.len(),
            entries,
            best_total: self.best.0,
            stop_reason,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    /// Moves back to the best iterate, keeping the optimizer moments, so
    /// further steps continue from it.
    pub fn resume_from_best(&mut self) {
        self.params = self.best.1.clone();
        self.corr = None;
        self.last_exact = None;
        self.converged = false;
    }

    /// Evaluates the current iterate exactly and folds it into the best.
    pub fn finish(&mut self) -> Result<GeometricLoss> {
        let loss = self.problem.exact_loss(&self.transforms());
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite geometric loss after {} iterations",
                self.iteration
            )));
        }
        self.record_exact(&loss);
        Ok(loss)
    }
}

/// Direct per-pair solve for the part transforms: starts at identity, runs
/// up to `geo_iters` Adam steps with assignments refreshed every
/// `correspondence_refresh` steps, stops early once the exact loss changes by
/// less than [`CONVERGENCE_TOLERANCE`] (relative) across a window, and
/// returns the best exactly-evaluated iterate.
pub fn optimize_transforms(
    source: &LabeledPointSet,
    target: &LabeledPointSet,
    ells: &[Ellipsoid],
    cfg: &RunConfig,
) -> Result<(PartTransforms, OptimizerTrace)> {
    let mut solver = TransformSolver::new(source, target, ells, cfg)?;
    let trace = solver.run(cfg.geo_iters)?;
    Ok((solver.best_transforms(), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sample_surface;
    use crate::part_field::fit_mesh_part_ellipsoids;
    use crate::synth;

    #[test]
    fn identity_recovered_when_target_is_source() {
        let a = synth::quadruped(&synth::QuadrupedParams::default());
        let p = sample_surface(&a.mesh, &a.labels, 600, 3).unwrap();
        let ells = fit_mesh_part_ellipsoids(&a.mesh, &a.labels, 200, 1).unwrap();
        let cfg = RunConfig {
            geo_iters: 30,
            ellipsoid_surface_samples: 64,
            ..RunConfig::default()
        };
        let (t, trace) = optimize_transforms(&p, &p, &ells, &cfg).unwrap();
        let id = PartTransforms::identity(ells.len()).to_params();
        let dev = t.to_params().iter().zip(&id).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-2, "max deviation {dev}");
        let first = trace.entries[0].total;
        assert!(trace.best_total <= first);
        for w in trace.entries.windows(2) {
            assert!(w[1].best_total <= w[0].best_total);
        }
    }

    #[test]
    fn zero_iterations_returns_identity() {
        let a = synth::quadruped(&synth::QuadrupedParams::default());
        let p = sample_surface(&a.mesh, &a.labels, 300, 3).unwrap();
        let ells = fit_mesh_part_ellipsoids(&a.mesh, &a.labels, 200, 1).unwrap();
        let cfg = RunConfig {
            geo_iters: 0,
            ellipsoid_surface_samples: 32,
            ..RunConfig::default()
        };
        let (t, trace) = optimize_transforms(&p, &p, &ells, &cfg).unwrap();
        assert_eq!(t, PartTransforms::identity(ells.len()));
        assert_eq!(trace.iterations, 0);
    }
}
