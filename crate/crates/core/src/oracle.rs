//! Brute-force reference implementations used to validate the main pipeline.
//!
//! Nothing here shares state with the solver: the game tree is expanded
//! recursively without memoization, every action set is found by a linear
//! scan of the mesh, and Opponent values are recomputed from their subtrees
//! instead of read from a table.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{cost, euclidean, reach_box, Aabb, GeometryError};
use crate::instance::InstanceSpec;
use crate::mesh::MeshSet;
use crate::solver::{Entry, ValueTables};

/// Leaf budget of [`naive_minimax`].
pub const MAX_LEAVES: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("game tree exceeds {0} leaves")]
    TreeTooLarge(u64),
    #[error("node {node} has no successors at t={t}")]
    NoNeighbors { t: usize, node: usize },
    #[error("node {node} has no body at t={t}")]
    MissingBody { t: usize, node: usize },
    #[error("no admissible vertex at t={t} for node {node}")]
    EmptyActionSet { t: usize, node: usize },
    #[error("sampling pitch must be positive, got {0}")]
    BadPitch(f64),
    #[error("at least one sample is required")]
    NoSamples,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Values of every state visited by the exhaustive expansion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NaiveResult {
    pub value: f64,
    pub root_best: usize,
    /// `V̂_0(i)` keyed by node.
    pub initial: BTreeMap<usize, Entry>,
    /// `V̂_t` keyed by `(t, vertex of X̂_{t-1}, node i_t)`.
    pub player: BTreeMap<(usize, usize, usize), Entry>,
    /// `Û_t` keyed by `(t, vertex of X̂_{t-1}, node i_{t-1})`.
    pub opponent: BTreeMap<(usize, usize, usize), Entry>,
    pub leaves: u64,
}

struct Expander<'a> {
    spec: &'a InstanceSpec,
    meshes: &'a MeshSet,
    limit: u64,
    out: NaiveResult,
}

impl Expander<'_> {
    fn opponent(&mut self, t: usize, prev: Option<(usize, usize)>) -> Result<Entry, OracleError> {
        let choices: Vec<usize> = match prev {
            None => (0..self.spec.node_count())
                .filter(|&i| self.spec.body(0, i).is_some())
                .collect(),
            Some((_, node)) => self.spec.graph().neighbors(node).expect("valid node").to_vec(),
        };
        if choices.is_empty() {
            let node = prev.map_or(0, |p| p.1);
            return Err(OracleError::NoNeighbors { t, node });
        }
        let mut best: Option<Entry> = None;
        for j in choices {
            let v = self.player(t, prev.map(|p| p.0), j)?;
            if best.is_none_or(|b| v.value > b.value) {
                best = Some(Entry {
                    value: v.value,
                    best: j,
                });
            }
        }
        let best = best.expect("nonempty");
        if let Some((vertex, node)) = prev {
            self.out.opponent.insert((t, vertex, node), best);
        }
        Ok(best)
    }

    fn player(&mut self, t: usize, prev_vertex: Option<usize>, node: usize) -> Result<Entry, OracleError> {
        let spec = self.spec;
        let horizon = spec.horizon();
        let body = spec.body(t, node).ok_or(OracleError::MissingBody { t, node })?;
        let reach = match prev_vertex {
            Some(v) => Some(reach_box(self.meshes.vertex(t - 1, v), spec.rho(), spec.domain())?),
            None => None,
        };
        let mesh = self.meshes.step(t).expect("timestep within horizon");
        let mut best: Option<Entry> = None;
        for (y, coords) in mesh.iter() {
            if !body.contains(coords) || reach.as_ref().is_some_and(|r| !r.contains(coords)) {
                continue;
            }
            let value = match prev_vertex {
                None => self.opponent(1, Some((y, node)))?.value,
                Some(v) => {
                    let step = cost(self.meshes.vertex(t - 1, v), coords)?;
                    if t == horizon {
                        self.out.leaves += 1;
                        if self.out.leaves > self.limit {
                            return Err(OracleError::TreeTooLarge(self.limit));
                        }
                        step
                    } else {
                        step + self.opponent(t + 1, Some((y, node)))?.value
                    }
                }
            };
            if best.is_none_or(|b| value < b.value) {
                best = Some(Entry { value, best: y });
            }
        }
        let best = best.ok_or(OracleError::EmptyActionSet { t, node })?;
        match prev_vertex {
            Some(v) => self.out.player.insert((t, v, node), best),
            None => self.out.initial.insert(node, best),
        };
        Ok(best)
    }
}

/// Lists every state where `tables` and the exhaustive expansion disagree,
/// in value or in chosen action. Comparison is exact.
pub fn table_mismatches(naive: &NaiveResult, tables: &ValueTables) -> Vec<String> {
    let mut out = Vec::new();
    let mut cmp = |what: String, table: Option<Entry>, reference: Entry| {
        if table != Some(reference) {
            out.push(format!("{what}: table {table:?}, oracle {reference:?}"));
        }
    };
    cmp(
        "U0".into(),
        Some(tables.root()),
        Entry {
            value: naive.value,
            best: naive.root_best,
        },
    );
    for (&i, &e) in &naive.initial {
        cmp(format!("V0(node {i})"), tables.initial(i), e);
    }
    for (&(t, v, i), &e) in &naive.player {
        cmp(format!("V{t}(vertex {v}, node {i})"), tables.player(t, v, i), e);
    }
    for (&(t, v, i), &e) in &naive.opponent {
        cmp(format!("U{t}(vertex {v}, node {i})"), tables.opponent(t, v, i), e);
    }
    out
}

/// Exhaustive max-min over the discrete game tree.
pub fn naive_minimax(spec: &InstanceSpec, meshes: &MeshSet) -> Result<NaiveResult, OracleError> {
    naive_minimax_with_limit(spec, meshes, MAX_LEAVES)
}

pub fn naive_minimax_with_limit(spec: &InstanceSpec, meshes: &MeshSet, limit: u64) -> Result<NaiveResult, OracleError> {
    let mut ex = Expander {
        spec,
        meshes,
        limit,
        out: NaiveResult::default(),
    };
    let root = ex.opponent(0, None)?;
    ex.out.value = root.value;
    ex.out.root_best = root.best;
    Ok(ex.out)
}

fn sample_axes(b: &Aabb, pitch: f64) -> Vec<Vec<f64>> {
    (0..b.dim())
        .map(|k| {
            let (lo, hi) = (b.lo()[k], b.hi()[k]);
            let n = ((hi - lo) / pitch).ceil().max(1.0) as usize;
            (0..=n).map(|s| lo + (hi - lo) * s as f64 / n as f64).collect()
        })
        .collect()
}

fn nearest_on_axis(axis: &[f64], x: f64) -> f64 {
    let k = axis.partition_point(|&c| c < x);
    let mut best = f64::INFINITY;
    for c in [k.checked_sub(1), Some(k)]
        .into_iter()
        .flatten()
        .filter_map(|i| axis.get(i))
    {
        best = best.min((c - x).abs());
    }
    best
}

/// `sup_{p ∈ samples(from)} min_{q ∈ samples(to)} |p - q|`; the minimum over
/// a tensor grid separates into per-axis nearest coordinates.
fn directed_sampled(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let d = from.len();
    let mut idx = vec![0usize; d];
    let mut worst: f64 = 0.0;
    loop {
        let sq: f64 = (0..d).map(|k| nearest_on_axis(&to[k], from[k][idx[k]]).powi(2)).sum();
        worst = worst.max(sq.sqrt());
        let mut k = 0;
        loop {
            if k == d {
                return worst;
            }
            idx[k] += 1;
            if idx[k] < from[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Hausdorff distance estimated on sample grids of spacing at most `pitch`;
/// within `pitch * sqrt(d) / 2` of the exact value.
pub fn sample_hausdorff(a: &Aabb, b: &Aabb, pitch: f64) -> Result<f64, OracleError> {
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(OracleError::BadPitch(pitch));
    }
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        }
        .into());
    }
    let sa = sample_axes(a, pitch);
    let sb = sample_axes(b, pitch);
    Ok(directed_sampled(&sa, &sb).max(directed_sampled(&sb, &sa)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageProbe {
    /// Largest nearest-vertex distance over the samples.
    pub worst_distance: f64,
    /// `delta - worst_distance`.
    pub slack: f64,
}

/// Distance from uniform random points of `region` to the nearest vertex of
/// `X̂_t` lying inside `region` (infinite when there is none).
pub fn coverage_probe(
    meshes: &MeshSet,
    t: usize,
    region: &Aabb,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<CoverageProbe, OracleError> {
    if samples == 0 {
        return Err(OracleError::NoSamples);
    }
    let mesh = meshes
        .step(t)
        .map_err(|_| OracleError::EmptyActionSet { t, node: usize::MAX })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p: Vec<f64> = (0..region.dim())
            .map(|k| rng.gen_range(region.lo()[k]..=region.hi()[k]))
            .collect();
        let nearest = mesh
            .iter()
            .filter(|(_, v)| region.contains(v))
            .map(|(_, v)| euclidean(&p, v))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(CoverageProbe {
        worst_distance: worst,
        slack: delta - worst,
    })
}
