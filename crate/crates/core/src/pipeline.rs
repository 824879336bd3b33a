//! End-to-end solve: constants, schedule, meshes, tables. Also the error sweep.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::bounds::{delta_schedule, lipschitz_for_box_class, BoundsError, DeltaSchedule};
use crate::instance::InstanceSpec;
use crate::mesh::{build_meshes, MeshError, MeshSet};
use crate::solver::{backward_induction, SolveError, ValueTables};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("sweep needs at least one epsilon")]
    NoEpsilons,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub epsilon: f64,
    /// Replaces the box-class `L_theta = 1` in the schedule.
    pub l_theta_override: Option<f64>,
}

impl SolveOptions {
    pub fn new(epsilon: f64) -> Self {
        SolveOptions {
            epsilon,
            l_theta_override: None,
        }
    }

    pub fn constants(&self) -> (f64, f64) {
        let (l_c, l_theta) = lipschitz_for_box_class();
        (l_c, self.l_theta_override.unwrap_or(l_theta))
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub schedule: DeltaSchedule,
    pub meshes: MeshSet,
    pub tables: ValueTables,
    pub wall_ms: u64,
}

impl Solution {
    pub fn game_value(&self) -> f64 {
        self.tables.game_value()
    }
}

pub fn solve(spec: &InstanceSpec, opts: &SolveOptions) -> Result<Solution, PipelineError> {
    let start = Instant::now();
    let (l_c, l_theta) = opts.constants();
    let schedule = delta_schedule(opts.epsilon, l_c, l_theta, spec.horizon())?;
    let meshes = build_meshes(spec, &schedule)?;
    let tables = backward_induction(spec, &meshes)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    Ok(Solution {
        schedule,
        meshes,
        tables,
        wall_ms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub desired_error: f64,
    pub achieved_value: f64,
    /// `achieved_value - true_value`.
    pub actual_error: f64,
    pub mesh_total: usize,
    pub wall_ms: u64,
}

/// Solves once per epsilon, largest epsilon first.
pub fn run_sweep(
    spec: &InstanceSpec,
    epsilons: &[f64],
    true_value: f64,
    l_theta_override: Option<f64>,
) -> Result<Vec<SweepRow>, PipelineError> {
    if epsilons.is_empty() {
        return Err(PipelineError::NoEpsilons);
    }
    if let Some(&bad) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(BoundsError::BadEpsilon(bad).into());
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .into_iter()
        .map(|epsilon| {
            let sol = solve(
                spec,
                &SolveOptions {
                    epsilon,
                    l_theta_override,
                },
            )?;
            Ok(SweepRow {
                desired_error: epsilon,
                achieved_value: sol.game_value(),
                actual_error: sol.game_value() - true_value,
                mesh_total: sol.meshes.total_vertices(),
                wall_ms: sol.wall_ms,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("desired_error,actual_error,u0,mesh_total,wall_ms\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.desired_error, r.actual_error, r.achieved_value, r.mesh_total, r.wall_ms
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::instance::GraphSpec;

    fn nested() -> InstanceSpec {
        let bodies = (0..3)
            .map(|t| vec![Some(Aabb::cube(2, 0.4 - 0.1 * t as f64, 0.6 + 0.1 * t as f64).unwrap())])
            .collect();
        let graph = GraphSpec::new(1, vec![(0, 0)]).unwrap();
        InstanceSpec::new(2, Aabb::cube(2, 0.0, 1.0).unwrap(), 2, 0.5, graph, bodies).unwrap()
    }

    #[test]
    fn sweep_sorts_descending_and_stays_in_band() {
        let rows = run_sweep(&nested(), &[0.2, 0.4], 0.0, None).unwrap();
        assert_eq!(rows.iter().map(|r| r.desired_error).collect::<Vec<_>>(), vec![0.4, 0.2]);
        for r in &rows {
            assert!(r.actual_error >= 0.0 && r.actual_error <= r.desired_error);
        }
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("desired_error,actual_error,u0,mesh_total,wall_ms\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn sweep_rejects_bad_epsilons() {
        assert!(matches!(
            run_sweep(&nested(), &[], 0.0, None),
            Err(PipelineError::NoEpsilons)
        ));
        assert!(matches!(
            run_sweep(&nested(), &[0.1, 0.0], 0.0, None),
            Err(PipelineError::Bounds(BoundsError::BadEpsilon(_)))
        ));
    }

    #[test]
    fn override_coarsens_the_schedule() {
        let spec = nested();
        let base = solve(&spec, &SolveOptions::new(0.4)).unwrap();
        let loose = solve(
            &spec,
            &SolveOptions {
                epsilon: 0.4,
                l_theta_override: Some(0.0),
            },
        )
        .unwrap();
        assert!(loose.schedule.delta[0] > base.schedule.delta[0]);
        assert!(loose.meshes.total_vertices() <= base.meshes.total_vertices());
    }

    #[test]
    fn single_epsilon_gives_one_row() {
        let rows = run_sweep(&nested(), &[0.4], 0.0, None).unwrap();
        assert_eq!(rows.len(), 1);
    }
}
