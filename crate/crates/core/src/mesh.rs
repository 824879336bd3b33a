//! Per-timestep vertex sets and their coverage verification.
//!
//! Each `X̂_t` is the union of
//!
//! 1. a uniform grid over the domain,
//! 2. at `t = 0`, a grid over every initial body,
//! 3. at `t >= 1`, for every predecessor vertex inside an active body and every
//!    successor node `j`, a grid over `reach(x̂) ∩ Q_t^(j)`.
//!
//! All grids use a per-axis spacing of at most `h_t = delta_t * sqrt(2 / d)`,
//! so any point of a covered box is within `h_t * sqrt(d) / 2 <= delta_t` of a
//! vertex inside that box. Per-axis coordinates divide the box extent evenly,
//! which makes both corners vertices.
//!
//! Intersection grids reuse the coordinates of the body grid of `Q_t^(j)` and
//! add the intersection's own faces, so neighbouring predecessors share most
//! of their vertices.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::DeltaSchedule;
use crate::geometry::{euclidean, intersect_unchecked, reach_unchecked, Aabb, Point};
use crate::instance::InstanceSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("schedule has horizon {schedule}, instance has {instance}")]
    ScheduleMismatch { schedule: usize, instance: usize },
    #[error("resolution at t={t} must be finite and positive, got {delta}")]
    BadDelta { t: usize, delta: f64 },
    #[error("empty intersection at t={t}: reach of vertex {vertex} misses the body of node {node}")]
    EmptyIntersection { t: usize, vertex: usize, node: usize },
    #[error("timestep {t} outside 0..={horizon}")]
    BadTimestep { t: usize, horizon: usize },
    #[error("vertex at t={t} has dimension {actual}, expected {expected}")]
    Dimension { t: usize, expected: usize, actual: usize },
}

/// Evenly spaced coordinates from `lo` to `hi` (inclusive) with spacing at most `h`.
pub(crate) fn axis_coords(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let extent = hi - lo;
    if extent <= 0.0 {
        return vec![lo];
    }
    // the slack absorbs extent/h landing a hair above an integer
    let n = ((extent / h) - 1e-9).ceil().max(1.0) as usize;
    let mut out: Vec<f64> = (0..n).map(|k| lo + extent * k as f64 / n as f64).collect();
    out.push(hi);
    out
}

fn for_each_tensor<F: FnMut(&[usize])>(lens: &[usize], mut f: F) {
    if lens.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; lens.len()];
    loop {
        f(&idx);
        let mut k = 0;
        loop {
            if k == lens.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] < lens[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Uniform bucket grid over a bounding box, stored in CSR form.
#[derive(Debug, Clone)]
struct CellIndex {
    origin: Vec<f64>,
    cell: f64,
    dims: Vec<usize>,
    starts: Vec<u32>,
    ids: Vec<u32>,
}

impl CellIndex {
    fn build(bounds: &Aabb, coords: &[f64], pitch: f64) -> Self {
        let d = bounds.dim();
        let n = coords.len() / d;
        let max_extent = (0..d).map(|k| bounds.width(k)).fold(0.0, f64::max);
        // keep the cell count within a small multiple of the vertex count
        let mut cell = if pitch > 0.0 { pitch } else { max_extent.max(1.0) };
        let budget = (4 * n).max(1) as f64;
        loop {
            let count: f64 = (0..d).map(|k| (bounds.width(k) / cell).floor() + 1.0).product();
            if count <= budget || cell >= max_extent.max(f64::MIN_POSITIVE) {
                break;
            }
            cell *= 1.5;
        }
        let dims: Vec<usize> = (0..d).map(|k| (bounds.width(k) / cell).floor() as usize + 1).collect();
        let mut index = CellIndex {
            origin: bounds.lo().to_vec(),
            cell,
            dims,
            starts: Vec::new(),
            ids: Vec::new(),
        };
        let total: usize = index.dims.iter().product();
        let cells_of: Vec<usize> = (0..n).map(|v| index.flat(&coords[v * d..(v + 1) * d])).collect();
        let mut counts = vec![0u32; total + 1];
        for &c in &cells_of {
            counts[c + 1] += 1;
        }
        for c in 0..total {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut ids = vec![0u32; n];
        for (v, &c) in cells_of.iter().enumerate() {
            ids[fill[c] as usize] = v as u32;
            fill[c] += 1;
        }
        index.starts = counts;
        index.ids = ids;
        index
    }

    #[inline]
    fn axis_cell(&self, k: usize, x: f64) -> usize {
        let c = ((x - self.origin[k]) / self.cell).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[k] - 1)
        }
    }

    fn flat(&self, p: &[f64]) -> usize {
        let mut f = 0;
        for k in (0..p.len()).rev() {
            f = f * self.dims[k] + self.axis_cell(k, p[k]);
        }
        f
    }

    /// Visits every vertex id stored in cells overlapping `[lo, hi]`.
    fn visit_range<F: FnMut(usize)>(&self, lo: &[f64], hi: &[f64], mut f: F) {
        let d = lo.len();
        let first: Vec<usize> = (0..d).map(|k| self.axis_cell(k, lo[k])).collect();
        let lens: Vec<usize> = (0..d).map(|k| self.axis_cell(k, hi[k]) + 1 - first[k]).collect();
        for_each_tensor(&lens, |off| {
            let mut c = 0;
            for k in (0..d).rev() {
                c = c * self.dims[k] + first[k] + off[k];
            }
            let (s, e) = (self.starts[c] as usize, self.starts[c + 1] as usize);
            for &id in &self.ids[s..e] {
                f(id as usize);
            }
        });
    }
}

/// Insertion-ordered vertex list without duplicates.
///
/// Only bitwise-equal points are merged. Merging points that differ by
/// rounding noise can replace a vertex lying exactly on a clipped face by a
/// neighbour just outside that face, which empties the admissible set.
struct VertexSet {
    dim: usize,
    coords: Vec<f64>,
    seen: HashSet<Vec<u64>>,
}

impl VertexSet {
    fn new(dim: usize) -> Self {
        VertexSet {
            dim,
            coords: Vec::new(),
            seen: HashSet::new(),
        }
    }

    fn insert(&mut self, p: &[f64]) {
        // +0.0 and -0.0 are the same vertex
        let key = p.iter().map(|x| (x + 0.0).to_bits()).collect();
        if self.seen.insert(key) {
            self.coords.extend_from_slice(p);
        }
    }

    fn insert_grid(&mut self, axes: &[Vec<f64>]) {
        let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
        let mut p = vec![0.0; self.dim];
        let mut pts = Vec::new();
        for_each_tensor(&lens, |idx| {
            for k in 0..idx.len() {
                p[k] = axes[k][idx[k]];
            }
            pts.extend_from_slice(&p);
        });
        for q in pts.chunks(self.dim) {
            self.insert(q);
        }
    }
}

fn box_axes(b: &Aabb, h: f64) -> Vec<Vec<f64>> {
    (0..b.dim()).map(|k| axis_coords(b.lo()[k], b.hi()[k], h)).collect()
}

/// Vertices of the grid over `b ⊆ body` that are not already vertices of the
/// body grid `body_axes`: tensor points with at least one face coordinate.
fn face_points(b: &Aabb, body_axes: &[Vec<f64>]) -> Vec<f64> {
    let d = b.dim();
    let mut axes: Vec<Vec<(f64, bool)>> = Vec::with_capacity(d);
    for (k, q) in body_axes.iter().enumerate().take(d) {
        let (lo, hi) = (b.lo()[k], b.hi()[k]);
        let on_grid = |x: f64| q.binary_search_by(|c| c.total_cmp(&x)).is_ok();
        let mut axis = vec![(lo, on_grid(lo))];
        axis.extend(q.iter().filter(|&&c| c > lo && c < hi).map(|&c| (c, true)));
        if hi > lo {
            axis.push((hi, on_grid(hi)));
        }
        axes.push(axis);
    }
    let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
    let mut out = Vec::new();
    for_each_tensor(&lens, |idx| {
        if (0..d).all(|k| axes[k][idx[k]].1) {
            return;
        }
        out.extend((0..d).map(|k| axes[k][idx[k]].0));
    });
    out
}

/// Vertex set of one timestep with its spatial index.
#[derive(Debug, Clone)]
pub struct TimeMesh {
    dim: usize,
    coords: Vec<f64>,
    pitch: f64,
    index: CellIndex,
}

impl TimeMesh {
    fn new(domain: &Aabb, coords: Vec<f64>, pitch: f64) -> Self {
        let index = CellIndex::build(domain, &coords, pitch);
        TimeMesh {
            dim: domain.dim(),
            coords,
            pitch,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Per-axis grid spacing bound `h_t`.
    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    #[inline]
    pub fn vertex(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.coords.chunks(self.dim).enumerate()
    }

    /// Ids of vertices inside `b`, ascending.
    pub fn query(&self, b: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        self.index.visit_range(b.lo(), b.hi(), |id| {
            if b.contains(self.vertex(id)) {
                out.push(id);
            }
        });
        out.sort_unstable();
        out
    }

    /// Closest vertex within `radius` of `p` satisfying `keep`, lowest id on ties.
    fn nearest_within<F: Fn(&[f64]) -> bool>(&self, p: &[f64], radius: f64, keep: F) -> Option<(f64, usize)> {
        let lo: Vec<f64> = p.iter().map(|x| x - radius).collect();
        let hi: Vec<f64> = p.iter().map(|x| x + radius).collect();
        let mut best: Option<(f64, usize)> = None;
        self.index.visit_range(&lo, &hi, |id| {
            let v = self.vertex(id);
            if !keep(v) {
                return;
            }
            let dist = euclidean(p, v);
            if dist <= radius && best.is_none_or(|(bd, bid)| dist < bd || (dist == bd && id < bid)) {
                best = Some((dist, id));
            }
        });
        best
    }

    fn nearest_scan<F: Fn(&[f64]) -> bool>(&self, p: &[f64], keep: F) -> Option<(f64, usize)> {
        self.iter()
            .filter(|(_, v)| keep(v))
            .map(|(id, v)| (euclidean(p, v), id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    }
}

/// Meshes `X̂_0..X̂_T` and the schedule that produced them.
#[derive(Debug, Clone)]
pub struct MeshSet {
    domain: Aabb,
    steps: Vec<TimeMesh>,
    schedule: DeltaSchedule,
}

impl MeshSet {
    /// Builds a mesh set from explicit vertex lists (merging duplicates), e.g.
    /// to test the solver or the verifier on hand-made meshes.
    pub fn from_vertices(
        domain: &Aabb,
        schedule: DeltaSchedule,
        vertices: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, MeshError> {
        let d = domain.dim();
        let factor = (2.0 / d as f64).sqrt();
        if vertices.len() != schedule.delta.len() {
            return Err(MeshError::ScheduleMismatch {
                schedule: schedule.horizon(),
                instance: vertices.len().saturating_sub(1),
            });
        }
        let mut steps = Vec::with_capacity(vertices.len());
        for (t, verts) in vertices.into_iter().enumerate() {
            let mut set = VertexSet::new(d);
            for v in verts {
                if v.len() != d {
                    return Err(MeshError::Dimension {
                        t,
                        expected: d,
                        actual: v.len(),
                    });
                }
                set.insert(&v);
            }
            steps.push(TimeMesh::new(domain, set.coords, schedule.delta[t] * factor));
        }
        Ok(MeshSet {
            domain: domain.clone(),
            steps,
            schedule,
        })
    }

    /// A copy with vertex `id` removed from `X̂_t`; later ids shift down by one.
    pub fn without_vertex(&self, t: usize, id: usize) -> Result<MeshSet, MeshError> {
        self.step(t)?;
        let vertices = self
            .steps
            .iter()
            .enumerate()
            .map(|(s, m)| {
                m.iter()
                    .filter(|(v, _)| s != t || *v != id)
                    .map(|(_, c)| c.to_vec())
                    .collect()
            })
            .collect();
        MeshSet::from_vertices(&self.domain, self.schedule.clone(), vertices)
    }

    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn schedule(&self) -> &DeltaSchedule {
        &self.schedule
    }

    pub fn step(&self, t: usize) -> Result<&TimeMesh, MeshError> {
        self.steps.get(t).ok_or(MeshError::BadTimestep {
            t,
            horizon: self.horizon(),
        })
    }

    /// Unchecked accessor for internal hot loops.
    pub(crate) fn at(&self, t: usize) -> &TimeMesh {
        &self.steps[t]
    }

    pub fn len(&self, t: usize) -> usize {
        self.steps.get(t).map_or(0, TimeMesh::len)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.steps.iter().map(TimeMesh::len).collect()
    }

    pub fn total_vertices(&self) -> usize {
        self.steps.iter().map(TimeMesh::len).sum()
    }

    pub fn vertex(&self, t: usize, id: usize) -> &[f64] {
        self.steps[t].vertex(id)
    }

    /// Ids of `X̂_t` inside the closed box `b`, ascending.
    pub fn range_query(&self, t: usize, b: &Aabb) -> Result<Vec<usize>, MeshError> {
        let step = self.step(t)?;
        if b.dim() != self.dim() {
            return Err(MeshError::Dimension {
                t,
                expected: self.dim(),
                actual: b.dim(),
            });
        }
        Ok(step.query(b))
    }
}

fn check_schedule(spec: &InstanceSpec, schedule: &DeltaSchedule) -> Result<(), MeshError> {
    if schedule.horizon() != spec.horizon() {
        return Err(MeshError::ScheduleMismatch {
            schedule: schedule.horizon(),
            instance: spec.horizon(),
        });
    }
    for (t, &delta) in schedule.delta.iter().enumerate() {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(MeshError::BadDelta { t, delta });
        }
    }
    Ok(())
}

/// `(predecessor vertex, node, intersection box)`.
type Target = (usize, usize, Aabb);

/// Intersection boxes `reach(x̂) ∩ Q_t^(j)` over predecessors `x̂ ∈ X̂_{t-1}`
/// inside an active body, first occurrence of each distinct `(j, box)` kept.
fn intersection_targets(spec: &InstanceSpec, prev: &TimeMesh, t: usize) -> Result<Vec<Target>, MeshError> {
    let per_vertex: Vec<Result<Vec<Target>, MeshError>> = (0..prev.len())
        .into_par_iter()
        .map(|v| {
            let x = prev.vertex(v);
            let mut out = Vec::new();
            let mut seen_targets = Vec::new();
            for &i in spec.active_nodes(t - 1) {
                let body = spec.body(t - 1, i).expect("active node has a body");
                if !body.contains(x) {
                    continue;
                }
                let reach = reach_unchecked(x, spec.rho(), spec.domain());
                for &j in spec.graph().succ(i) {
                    if seen_targets.contains(&j) {
                        continue;
                    }
                    seen_targets.push(j);
                    let dst = spec.body(t, j).expect("successor has a body");
                    match intersect_unchecked(&reach, dst) {
                        Some(b) => out.push((v, j, b)),
                        None => return Err(MeshError::EmptyIntersection { t, vertex: v, node: j }),
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut seen = HashSet::new();
    let mut targets = Vec::new();
    for chunk in per_vertex {
        for (v, j, b) in chunk? {
            let mut key = b.bits_key();
            key.push(j as u64);
            if seen.insert(key) {
                targets.push((v, j, b));
            }
        }
    }
    Ok(targets)
}

/// Builds `X̂_0..X̂_T` for the given resolutions.
pub fn build_meshes(spec: &InstanceSpec, schedule: &DeltaSchedule) -> Result<MeshSet, MeshError> {
    check_schedule(spec, schedule)?;
    let d = spec.dimension();
    let factor = (2.0 / d as f64).sqrt();
    let domain = spec.domain();
    let mut steps: Vec<TimeMesh> = Vec::with_capacity(spec.horizon() + 1);
    for t in 0..=spec.horizon() {
        let h = schedule.delta[t] * factor;
        let mut set = VertexSet::new(d);
        set.insert_grid(&box_axes(domain, h));
        let body_axes: Vec<Option<Vec<Vec<f64>>>> = (0..spec.node_count())
            .map(|j| {
                spec.is_active(t, j)
                    .then(|| box_axes(spec.body(t, j).expect("active node has a body"), h))
            })
            .collect();
        for axes in body_axes.iter().flatten() {
            set.insert_grid(axes);
        }
        if t > 0 {
            let targets = intersection_targets(spec, &steps[t - 1], t)?;
            let faces: Vec<Vec<f64>> = targets
                .par_iter()
                .map(|(_, j, b)| face_points(b, body_axes[*j].as_ref().expect("target is active")))
                .collect();
            for pts in faces {
                for p in pts.chunks(d) {
                    set.insert(p);
                }
            }
        }
        steps.push(TimeMesh::new(domain, set.coords, h));
    }
    Ok(MeshSet {
        domain: domain.clone(),
        steps,
        schedule: schedule.clone(),
    })
}

/// One probe whose nearest admissible vertex is farther than the resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageFailure {
    pub t: usize,
    /// Predecessor vertex in `X̂_{t-1}` (intersection criterion only).
    pub vertex: Option<usize>,
    pub node: Option<usize>,
    pub probe: Point,
    /// Distance to the nearest admissible vertex; infinite if there is none.
    pub distance: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub regions: usize,
    pub probes: usize,
    /// Minimum over probes of `delta_t - distance`; negative on failure.
    pub worst_slack: f64,
    pub failures: Vec<CoverageFailure>,
}

impl CriterionReport {
    fn empty() -> Self {
        CriterionReport {
            regions: 0,
            probes: 0,
            worst_slack: f64::INFINITY,
            failures: Vec::new(),
        }
    }

    fn merge(&mut self, other: CriterionReport) {
        self.regions += other.regions;
        self.probes += other.probes;
        self.worst_slack = self.worst_slack.min(other.worst_slack);
        let room = MAX_FAILURES.saturating_sub(self.failures.len());
        self.failures.extend(other.failures.into_iter().take(room));
    }

    pub fn is_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

const MAX_FAILURES: usize = 32;

/// Outcome of probing the three coverage criteria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReport {
    /// Whole-domain resolution at every timestep.
    pub domain: CriterionReport,
    /// Resolution inside each initial body.
    pub initial_bodies: CriterionReport,
    /// Resolution inside each reach/body intersection.
    pub intersections: CriterionReport,
}

impl MeshReport {
    pub fn is_pass(&self) -> bool {
        self.domain.is_pass() && self.initial_bodies.is_pass() && self.intersections.is_pass()
    }
}

/// Probe grid over `region` with spacing at most `pitch`, capped at `max_probes` points.
fn probe_axes(region: &Aabb, pitch: f64, max_probes: usize) -> Vec<Vec<f64>> {
    let d = region.dim();
    let per_axis_cap = (max_probes as f64).powf(1.0 / d as f64).floor().max(2.0) as usize;
    (0..d)
        .map(|k| {
            let (lo, hi) = (region.lo()[k], region.hi()[k]);
            if hi <= lo {
                return vec![lo];
            }
            let n = ((hi - lo) / pitch).ceil().clamp(1.0, (per_axis_cap - 1) as f64) as usize;
            (0..=n)
                .map(|s| {
                    if s == n {
                        hi
                    } else {
                        lo + (hi - lo) * s as f64 / n as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn probe_region(
    mesh: &TimeMesh,
    region: &Aabb,
    delta: f64,
    restrict: bool,
    max_probes: usize,
    label: (usize, Option<usize>, Option<usize>),
) -> CriterionReport {
    let axes = probe_axes(region, delta / 4.0, max_probes);
    let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
    let mut report = CriterionReport::empty();
    report.regions = 1;
    let mut p = vec![0.0; region.dim()];
    let keep = |v: &[f64]| !restrict || region.contains(v);
    for_each_tensor(&lens, |idx| {
        for k in 0..idx.len() {
            p[k] = axes[k][idx[k]];
        }
        report.probes += 1;
        let dist = match mesh.nearest_within(&p, delta, keep) {
            Some((dist, _)) => dist,
            None => mesh.nearest_scan(&p, keep).map_or(f64::INFINITY, |(dist, _)| dist),
        };
        report.worst_slack = report.worst_slack.min(delta - dist);
        if dist > delta && report.failures.len() < MAX_FAILURES {
            report.failures.push(CoverageFailure {
                t: label.0,
                vertex: label.1,
                node: label.2,
                probe: Point(p.clone()),
                distance: dist,
                delta,
            });
        }
    });
    report
}

/// Default probe cap per region.
pub const DEFAULT_MAX_PROBES: usize = 1 << 16;

/// Probes every coverage criterion on a grid of pitch `delta / 4` (capped per region).
pub fn verify_meshes(spec: &InstanceSpec, schedule: &DeltaSchedule, meshes: &MeshSet) -> MeshReport {
    verify_meshes_with(spec, schedule, meshes, DEFAULT_MAX_PROBES)
}

pub fn verify_meshes_with(
    spec: &InstanceSpec,
    schedule: &DeltaSchedule,
    meshes: &MeshSet,
    max_probes: usize,
) -> MeshReport {
    let horizon = spec.horizon().min(meshes.horizon()).min(schedule.horizon());
    let mut domain = CriterionReport::empty();
    for t in 0..=horizon {
        domain.merge(probe_region(
            meshes.at(t),
            spec.domain(),
            schedule.delta[t],
            false,
            max_probes,
            (t, None, None),
        ));
    }

    let mut initial_bodies = CriterionReport::empty();
    for &i in spec.active_nodes(0) {
        let body = spec.body(0, i).expect("active node has a body");
        initial_bodies.merge(probe_region(
            meshes.at(0),
            body,
            schedule.delta[0],
            true,
            max_probes,
            (0, None, Some(i)),
        ));
    }

    let mut intersections = CriterionReport::empty();
    for t in 1..=horizon {
        let prev = meshes.at(t - 1);
        let mut seen = HashSet::new();
        let mut regions = Vec::new();
        for (v, x) in prev.iter() {
            for &i in spec.active_nodes(t - 1) {
                if !spec.body(t - 1, i).expect("active").contains(x) {
                    continue;
                }
                let reach = reach_unchecked(x, spec.rho(), spec.domain());
                for &j in spec.graph().succ(i) {
                    let dst = spec.body(t, j).expect("successor has a body");
                    match intersect_unchecked(&reach, dst) {
                        Some(b) => {
                            let mut key = b.bits_key();
                            key.push(j as u64);
                            if seen.insert(key) {
                                regions.push((v, j, b));
                            }
                        }
                        None => intersections.merge(CriterionReport {
                            regions: 1,
                            probes: 0,
                            worst_slack: f64::NEG_INFINITY,
                            failures: vec![CoverageFailure {
                                t,
                                vertex: Some(v),
                                node: Some(j),
                                probe: Point::from(x),
                                distance: f64::INFINITY,
                                delta: schedule.delta[t],
                            }],
                        }),
                    }
                }
            }
        }
        let mesh = meshes.at(t);
        let delta = schedule.delta[t];
        let reports: Vec<CriterionReport> = regions
            .par_iter()
            .map(|(v, j, b)| probe_region(mesh, b, delta, true, max_probes, (t, Some(*v), Some(*j))))
            .collect();
        for r in reports {
            intersections.merge(r);
        }
    }

    MeshReport {
        domain,
        initial_bodies,
        intersections,
    }
}
