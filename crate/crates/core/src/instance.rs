//! Game instances: domain, Opponent graph, per-timestep bodies, reach radius.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{check_dim, Aabb, GeometryError, Point};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("reach radius must be finite and positive, got {0}")]
    BadRadius(f64),
    #[error("graph must have at least one node")]
    NoNodes,
    #[error("node id {id} out of range (node count {count})")]
    BadNode { id: usize, count: usize },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("bodies table has {actual} timesteps, expected horizon + 1 = {expected}")]
    BodyRows { expected: usize, actual: usize },
    #[error("bodies row {t} has {actual} entries, expected {expected} nodes")]
    BodyColumns { t: usize, expected: usize, actual: usize },
    #[error("body of node {node} at t={t} is not contained in the domain")]
    BodyOutsideDomain { t: usize, node: usize },
    #[error("no node has a body at t=0")]
    NoInitialBody,
    #[error("node {node} is reachable at t={t} but has no outgoing edges")]
    DeadEnd { t: usize, node: usize },
    #[error("node {node} is reachable at t={t} but has no body")]
    MissingBody { t: usize, node: usize },
}

/// Directed Opponent graph with optional self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl GraphSpec {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self, InstanceError> {
        if node_count == 0 {
            return Err(InstanceError::NoNodes);
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(i, j) in &edges {
            for id in [i, j] {
                if id >= node_count {
                    return Err(InstanceError::BadNode { id, count: node_count });
                }
            }
            if adjacency[i].contains(&j) {
                return Err(InstanceError::DuplicateEdge(i, j));
            }
            adjacency[i].push(j);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(GraphSpec {
            node_count,
            edges,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Successors of `i` in ascending id order.
    pub fn neighbors(&self, i: usize) -> Result<&[usize], InstanceError> {
        self.adjacency.get(i).map(Vec::as_slice).ok_or(InstanceError::BadNode {
            id: i,
            count: self.node_count,
        })
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i).is_some_and(|a| a.binary_search(&j).is_ok())
    }

    pub(crate) fn succ(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    dimension: usize,
    domain: Aabb,
    horizon: usize,
    rho: f64,
    nodes: usize,
    edges: Vec<[usize; 2]>,
    bodies: Vec<Vec<Option<Aabb>>>,
}

/// A validated game instance.
///
/// `active[t]` holds the nodes the Opponent can occupy at timestep `t`: every
/// node with a body at `t = 0`, then successors of active nodes. Bodies of
/// inactive nodes are kept but never consulted by the solver.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    dimension: usize,
    domain: Aabb,
    horizon: usize,
    rho: f64,
    graph: GraphSpec,
    bodies: Vec<Vec<Option<Aabb>>>,
    active: Vec<Vec<usize>>,
}

impl InstanceSpec {
    pub fn new(
        dimension: usize,
        domain: Aabb,
        horizon: usize,
        rho: f64,
        graph: GraphSpec,
        bodies: Vec<Vec<Option<Aabb>>>,
    ) -> Result<Self, InstanceError> {
        check_dim(dimension, domain.dim())?;
        if horizon == 0 {
            return Err(InstanceError::ZeroHorizon);
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(InstanceError::BadRadius(rho));
        }
        if bodies.len() != horizon + 1 {
            return Err(InstanceError::BodyRows {
                expected: horizon + 1,
                actual: bodies.len(),
            });
        }
        let n = graph.node_count();
        for (t, row) in bodies.iter().enumerate() {
            if row.len() != n {
                return Err(InstanceError::BodyColumns {
                    t,
                    expected: n,
                    actual: row.len(),
                });
            }
            for (node, body) in row.iter().enumerate() {
                if let Some(b) = body {
                    check_dim(dimension, b.dim())?;
                    if !domain.contains_box(b) {
                        return Err(InstanceError::BodyOutsideDomain { t, node });
                    }
                }
            }
        }

        let mut active = Vec::with_capacity(horizon + 1);
        let first: Vec<usize> = (0..n).filter(|&i| bodies[0][i].is_some()).collect();
        if first.is_empty() {
            return Err(InstanceError::NoInitialBody);
        }
        active.push(first);
        for t in 0..horizon {
            let mut next = vec![false; n];
            for &i in &active[t] {
                let succ = graph.succ(i);
                if succ.is_empty() {
                    return Err(InstanceError::DeadEnd { t, node: i });
                }
                for &j in succ {
                    next[j] = true;
                }
            }
            let next: Vec<usize> = (0..n).filter(|&j| next[j]).collect();
            for &j in &next {
                if bodies[t + 1][j].is_none() {
                    return Err(InstanceError::MissingBody { t: t + 1, node: j });
                }
            }
            active.push(next);
        }

        Ok(InstanceSpec {
            dimension,
            domain,
            horizon,
            rho,
            graph,
            bodies,
            active,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let graph = GraphSpec::new(file.nodes, file.edges.iter().map(|e| (e[0], e[1])).collect())?;
        InstanceSpec::new(file.dimension, file.domain, file.horizon, file.rho, graph, file.bodies)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            dimension: self.dimension,
            domain: self.domain.clone(),
            horizon: self.horizon,
            rho: self.rho,
            nodes: self.graph.node_count(),
            edges: self.graph.edges().iter().map(|&(i, j)| [i, j]).collect(),
            bodies: self.bodies.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> &Aabb {
        &self.domain
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn graph(&self) -> &GraphSpec {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn body(&self, t: usize, node: usize) -> Option<&Aabb> {
        self.bodies.get(t)?.get(node)?.as_ref()
    }

    /// Nodes the Opponent can occupy at `t`, ascending.
    pub fn active_nodes(&self, t: usize) -> &[usize] {
        &self.active[t]
    }

    pub fn is_active(&self, t: usize, node: usize) -> bool {
        self.active[t].binary_search(&node).is_ok()
    }

    /// Active transitions `(i, j)` from `t` to `t + 1` with both bodies present.
    pub fn transitions(&self, t: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.active[t]
            .iter()
            .flat_map(move |&i| self.graph.succ(i).iter().map(move |&j| (i, j)))
    }

    /// Certifies that the reach set from every point of an active body
    /// meets every successor body in a set with nonempty interior.
    ///
    /// Per axis the overlap length `min(b', x + rho) - max(a', x - rho)` is
    /// concave in `x`, so checking both endpoints of the source interval is
    /// exact.
    pub fn check_feasibility(&self) -> FeasibilityReport {
        let mut violations = Vec::new();
        for t in 0..self.horizon {
            for (i, j) in self.transitions(t) {
                let src = self.bodies[t][i].as_ref().expect("active node has a body");
                let dst = self.bodies[t + 1][j].as_ref().expect("successor has a body");
                if let Some(v) = self.first_violation(t, i, j, src, dst) {
                    violations.push(v);
                }
            }
        }
        FeasibilityReport { violations }
    }

    fn overlap(&self, axis: usize, x: f64, dst: &Aabb) -> f64 {
        let lo = (x - self.rho).max(self.domain.lo()[axis]).max(dst.lo()[axis]);
        let hi = (x + self.rho).min(self.domain.hi()[axis]).min(dst.hi()[axis]);
        hi - lo
    }

    fn first_violation(&self, t: usize, from: usize, to: usize, src: &Aabb, dst: &Aabb) -> Option<Violation> {
        let mut worst = Vec::with_capacity(self.dimension);
        let mut found = None;
        for axis in 0..self.dimension {
            let at_lo = self.overlap(axis, src.lo()[axis], dst);
            let at_hi = self.overlap(axis, src.hi()[axis], dst);
            worst.push(if at_hi < at_lo { src.hi()[axis] } else { src.lo()[axis] });
            if found.is_none() {
                if at_lo <= 0.0 {
                    found = Some((axis, Endpoint::Lo, at_lo));
                } else if at_hi <= 0.0 {
                    found = Some((axis, Endpoint::Hi, at_hi));
                }
            }
        }
        found.map(|(axis, endpoint, overlap)| {
            let mut witness = worst;
            witness[axis] = match endpoint {
                Endpoint::Lo => src.lo()[axis],
                Endpoint::Hi => src.hi()[axis],
            };
            Violation {
                t,
                from,
                to,
                axis,
                endpoint,
                overlap,
                witness: Point(witness),
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Lo,
    Hi,
}

/// A state from which the reach set fails to meet a successor body with
/// nonempty interior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub t: usize,
    pub from: usize,
    pub to: usize,
    pub axis: usize,
    pub endpoint: Endpoint,
    /// Overlap length on `axis` at the witness (nonpositive).
    pub overlap: f64,
    pub witness: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}
