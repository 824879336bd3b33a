//! Backward induction over the meshes.
//!
//! For `t = T` down to `1` and every vertex `x̂ ∈ X̂_{t-1}` lying in an active
//! body `Q_{t-1}^(i)`:
//!
//! ```text
//! V̂_T(x̂, j) = min_{y ∈ X̂_T ∩ R(x̂) ∩ Q_T^(j)} c(x̂, y)
//! V̂_t(x̂, j) = min_{y ∈ X̂_t ∩ R(x̂) ∩ Q_t^(j)} c(x̂, y) + Û_{t+1}(y, j)
//! Û_t(x̂, i) = max_{j ∈ N(i)} V̂_t(x̂, j)
//! ```
//!
//! then `V̂_0(i) = min_{y ∈ X̂_0 ∩ Q_0^(i)} Û_1(y, i)` and `Û_0 = max_i V̂_0(i)`.
//! Ties go to the lowest vertex id (Player) and the lowest node id (Opponent).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{euclidean, intersect_unchecked, reach_unchecked};
use crate::instance::InstanceSpec;
use crate::mesh::{MeshError, MeshSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("mesh horizon {mesh} does not match instance horizon {instance}")]
    HorizonMismatch { mesh: usize, instance: usize },
    #[error("no feasible mesh vertex at t={t} from vertex {vertex} for node {node}")]
    EmptyFeasibleSet { t: usize, vertex: usize, node: usize },
    #[error("missing value entry at t={t} for vertex {vertex}, node {node}")]
    MissingEntry { t: usize, vertex: usize, node: usize },
}

/// A value together with the action attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Entry {
    pub value: f64,
    /// Vertex id (Player entries) or node id (Opponent entries).
    pub best: usize,
}

/// Tables of one timestep `t >= 1`, keyed by a vertex of `X̂_{t-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTable {
    nodes: usize,
    player: Vec<Option<Entry>>,
    opponent: Vec<Option<Entry>>,
}

impl StageTable {
    fn empty(vertices: usize, nodes: usize) -> Self {
        StageTable {
            nodes,
            player: vec![None; vertices * nodes],
            opponent: vec![None; vertices * nodes],
        }
    }

    /// `V̂_t(vertex, node)` with the minimizing vertex of `X̂_t`.
    pub fn player(&self, vertex: usize, node: usize) -> Option<Entry> {
        *self.player.get(vertex * self.nodes + node)?
    }

    /// `Û_t(vertex, node)` with the maximizing successor node.
    pub fn opponent(&self, vertex: usize, node: usize) -> Option<Entry> {
        *self.opponent.get(vertex * self.nodes + node)?
    }

    pub fn player_entries(&self) -> impl Iterator<Item = (usize, usize, Entry)> + '_ {
        Self::entries(&self.player, self.nodes)
    }

    pub fn opponent_entries(&self) -> impl Iterator<Item = (usize, usize, Entry)> + '_ {
        Self::entries(&self.opponent, self.nodes)
    }

    fn entries(cells: &[Option<Entry>], nodes: usize) -> impl Iterator<Item = (usize, usize, Entry)> + '_ {
        cells
            .iter()
            .enumerate()
            .filter_map(move |(k, e)| e.map(|e| (k / nodes, k % nodes, e)))
    }
}

/// Discretized value functions `V̂_t`, `Û_t`, `V̂_0` and the game value `Û_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    nodes: usize,
    /// `stages[t - 1]` for `t = 1..=T`.
    stages: Vec<StageTable>,
    /// `V̂_0(i)` with the minimizing vertex of `X̂_0`.
    initial: Vec<Option<Entry>>,
    /// `Û_0` with the maximizing initial node.
    root: Entry,
}

impl ValueTables {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Tables of timestep `1 <= t <= T`.
    pub fn stage(&self, t: usize) -> Option<&StageTable> {
        self.stages.get(t.checked_sub(1)?)
    }

    pub fn player(&self, t: usize, vertex: usize, node: usize) -> Option<Entry> {
        self.stage(t)?.player(vertex, node)
    }

    pub fn opponent(&self, t: usize, vertex: usize, node: usize) -> Option<Entry> {
        self.stage(t)?.opponent(vertex, node)
    }

    pub fn initial(&self, node: usize) -> Option<Entry> {
        *self.initial.get(node)?
    }

    pub fn root(&self) -> Entry {
        self.root
    }

    /// The discretized game value `Û_0`.
    pub fn game_value(&self) -> f64 {
        self.root.value
    }

    /// CSV rows `t,kind,vertex_id,node,value,best_action`; `kind` is `V` or `U`,
    /// and `vertex_id` is empty for the `t = 0` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,kind,vertex_id,node,value,best_action\n");
        for (node, e) in self.initial.iter().enumerate() {
            if let Some(e) = e {
                let _ = writeln!(out, "0,V,,{node},{},{}", e.value, e.best);
            }
        }
        let _ = writeln!(out, "0,U,,,{},{}", self.root.value, self.root.best);
        for (k, stage) in self.stages.iter().enumerate() {
            let t = k + 1;
            for (v, node, e) in stage.player_entries() {
                let _ = writeln!(out, "{t},V,{v},{node},{},{}", e.value, e.best);
            }
            for (v, node, e) in stage.opponent_entries() {
                let _ = writeln!(out, "{t},U,{v},{node},{},{}", e.value, e.best);
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn from_initial(initial: Vec<Option<Entry>>) -> Self {
        let root = argmax_nodes(initial.iter().enumerate().filter_map(|(i, e)| e.map(|e| (i, e.value))))
            .expect("at least one entry");
        ValueTables {
            nodes: initial.len(),
            stages: Vec::new(),
            initial,
            root,
        }
    }
}

/// First maximum over `(node, value)` pairs given in ascending node order.
pub(crate) fn argmax_nodes(items: impl Iterator<Item = (usize, f64)>) -> Option<Entry> {
    let mut best: Option<Entry> = None;
    for (node, value) in items {
        if best.is_none_or(|b| value > b.value) {
            best = Some(Entry { value, best: node });
        }
    }
    best
}

struct Row {
    player: Vec<(usize, Entry)>,
    opponent: Vec<(usize, Entry)>,
}

fn solve_row(
    spec: &InstanceSpec,
    meshes: &MeshSet,
    next_stage: Option<&StageTable>,
    t: usize,
    v: usize,
) -> Result<Row, SolveError> {
    let x = meshes.at(t - 1).vertex(v);
    let sources: Vec<usize> = spec
        .active_nodes(t - 1)
        .iter()
        .copied()
        .filter(|&i| spec.body(t - 1, i).is_some_and(|b| b.contains(x)))
        .collect();
    let mut row = Row {
        player: Vec::new(),
        opponent: Vec::new(),
    };
    if sources.is_empty() {
        return Ok(row);
    }
    let mut targets: Vec<usize> = sources
        .iter()
        .flat_map(|&i| spec.graph().succ(i).iter().copied())
        .collect();
    targets.sort_unstable();
    targets.dedup();

    let next = meshes.at(t);
    let reach = reach_unchecked(x, spec.rho(), spec.domain());
    for &j in &targets {
        let body = spec.body(t, j).expect("successor has a body");
        let empty = || SolveError::EmptyFeasibleSet { t, vertex: v, node: j };
        let feasible = intersect_unchecked(&reach, body).ok_or_else(empty)?;
        let mut best: Option<Entry> = None;
        for y in next.query(&feasible) {
            let step = euclidean(x, next.vertex(y));
            let value = match next_stage {
                None => step,
                Some(stage) => {
                    let tail = stage.opponent(y, j).ok_or(SolveError::MissingEntry {
                        t: t + 1,
                        vertex: y,
                        node: j,
                    })?;
                    step + tail.value
                }
            };
            if best.is_none_or(|b| value < b.value) {
                best = Some(Entry { value, best: y });
            }
        }
        row.player.push((j, best.ok_or_else(empty)?));
    }
    for &i in &sources {
        let entry = argmax_nodes(spec.graph().succ(i).iter().map(|&j| {
            let k = targets.binary_search(&j).expect("successor is a target");
            (j, row.player[k].1.value)
        }))
        .expect("active node has successors");
        row.opponent.push((i, entry));
    }
    Ok(row)
}

/// Computes all discretized value tables.
pub fn backward_induction(spec: &InstanceSpec, meshes: &MeshSet) -> Result<ValueTables, SolveError> {
    let horizon = spec.horizon();
    if meshes.horizon() != horizon {
        return Err(SolveError::HorizonMismatch {
            mesh: meshes.horizon(),
            instance: horizon,
        });
    }
    let nodes = spec.node_count();
    let mut stages: Vec<StageTable> = Vec::with_capacity(horizon);
    for t in (1..=horizon).rev() {
        let prev_len = meshes.len(t - 1);
        let next_stage = stages.last();
        let rows: Vec<Result<Row, SolveError>> = (0..prev_len)
            .into_par_iter()
            .map(|v| solve_row(spec, meshes, next_stage, t, v))
            .collect();
        let mut table = StageTable::empty(prev_len, nodes);
        for (v, row) in rows.into_iter().enumerate() {
            let row = row?;
            for (j, e) in row.player {
                table.player[v * nodes + j] = Some(e);
            }
            for (i, e) in row.opponent {
                table.opponent[v * nodes + i] = Some(e);
            }
        }
        stages.push(table);
    }
    stages.reverse();

    let mut initial = vec![None; nodes];
    for &i in spec.active_nodes(0) {
        let body = spec.body(0, i).expect("active node has a body");
        let mut best: Option<Entry> = None;
        for y in meshes.range_query(0, body)? {
            let value = stages[0]
                .opponent(y, i)
                .ok_or(SolveError::MissingEntry {
                    t: 1,
                    vertex: y,
                    node: i,
                })?
                .value;
            if best.is_none_or(|b| value < b.value) {
                best = Some(Entry { value, best: y });
            }
        }
        initial[i] = Some(best.ok_or(SolveError::EmptyFeasibleSet {
            t: 0,
            vertex: usize::MAX,
            node: i,
        })?);
    }
    let root = argmax_nodes(
        spec.active_nodes(0)
            .iter()
            .map(|&i| (i, initial[i].expect("filled").value)),
    )
    .expect("at least one initial node");
    Ok(ValueTables {
        nodes,
        stages,
        initial,
        root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::delta_schedule;
    use crate::geometry::Aabb;
    use crate::instance::GraphSpec;
    use crate::mesh::build_meshes;

    fn single_node(dim: usize, domain: Aabb, rho: f64, bodies: Vec<Aabb>) -> InstanceSpec {
        let graph = GraphSpec::new(1, vec![(0, 0)]).unwrap();
        let horizon = bodies.len() - 1;
        InstanceSpec::new(
            dim,
            domain,
            horizon,
            rho,
            graph,
            bodies.into_iter().map(|b| vec![Some(b)]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn game_value_is_max_over_initial_nodes() {
        let tables = ValueTables::from_initial(vec![
            Some(Entry { value: 0.3, best: 0 }),
            Some(Entry { value: 0.7, best: 4 }),
        ]);
        assert_eq!(tables.game_value(), 0.7);
        assert_eq!(tables.root().best, 1);
    }

    #[test]
    fn argmax_ties_pick_lowest_node() {
        let e = argmax_nodes([(0, 1.0), (1, 1.0), (2, 0.5)].into_iter()).unwrap();
        assert_eq!(e.best, 0);
    }

    #[test]
    fn zero_cost_stay() {
        // Q_1 is reachable in full from Q_0 and contains it
        let spec = single_node(
            2,
            Aabb::cube(2, 0.0, 1.0).unwrap(),
            1.0,
            vec![Aabb::cube(2, 0.25, 0.5).unwrap(), Aabb::cube(2, 0.0, 1.0).unwrap()],
        );
        let schedule = delta_schedule(1.0, 1.0, 1.0, 1).unwrap();
        let meshes = build_meshes(&spec, &schedule).unwrap();
        let tables = backward_induction(&spec, &meshes).unwrap();
        assert_eq!(tables.game_value(), 0.0);
    }

    #[test]
    fn forced_step_value() {
        let spec = single_node(
            2,
            Aabb::new(vec![0.0, 0.0], vec![1.02, 0.02]).unwrap(),
            2.0,
            vec![
                Aabb::cube(2, 0.0, 0.02).unwrap(),
                Aabb::new(vec![1.0, 0.0], vec![1.02, 0.02]).unwrap(),
            ],
        );
        let schedule = delta_schedule(0.01, 1.0, 1.0, 1).unwrap();
        let meshes = build_meshes(&spec, &schedule).unwrap();
        let tables = backward_induction(&spec, &meshes).unwrap();
        let u0 = tables.game_value();
        // continuum value is 0.98 (closest faces); the discrete value may only exceed it
        assert!((0.98 - 1e-12..=0.98 + 0.01).contains(&u0), "{u0}");
    }

    #[test]
    fn tables_obey_max_relation() {
        let bodies = (0..3)
            .map(|t| Aabb::cube(2, 0.4 - 0.1 * t as f64, 0.6 + 0.1 * t as f64).unwrap())
            .collect();
        let spec = single_node(2, Aabb::cube(2, 0.0, 1.0).unwrap(), 0.5, bodies);
        let meshes = build_meshes(&spec, &delta_schedule(0.4, 1.0, 1.0, 2).unwrap()).unwrap();
        let tables = backward_induction(&spec, &meshes).unwrap();
        for t in 1..=2 {
            let stage = tables.stage(t).unwrap();
            for (v, i, u) in stage.opponent_entries() {
                let v_hat = stage.player(v, 0).unwrap();
                assert_eq!(u.value, v_hat.value);
                assert_eq!(i, 0);
            }
        }
        let u0 = tables.game_value();
        assert!((0.0..=0.4).contains(&u0));
        let csv = tables.to_csv();
        assert!(csv.starts_with("t,kind,vertex_id,node,value,best_action\n0,V,,0,"));
    }
}
