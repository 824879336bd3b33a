//! Policies, game simulation, deviations and the greedy baseline.
//!
//! The timeline at each step is: the Opponent picks a node (`i_0` freely among
//! nodes with an initial body, later a successor of the previous node), then
//! the Player picks a mesh vertex inside that node's body (and, for `t >= 1`,
//! inside the reach set of its previous vertex) and pays the distance moved.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{euclidean, intersect_unchecked, reach_unchecked, Point};
use crate::instance::InstanceSpec;
use crate::mesh::MeshSet;
use crate::solver::ValueTables;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlayError {
    #[error("t={t}: node {node} is not an admissible Opponent choice (previous node {prev:?})")]
    InvalidNode { t: usize, node: usize, prev: Option<usize> },
    #[error("t={t}: vertex {vertex} is not a feasible Player choice for node {node}")]
    InfeasibleVertex { t: usize, vertex: usize, node: usize },
    #[error("t={t}: no policy entry for vertex {vertex:?}, node {node}")]
    MissingEntry {
        t: usize,
        vertex: Option<usize>,
        node: usize,
    },
    #[error("t={t}: no feasible action for node {node}")]
    NoActions { t: usize, node: usize },
    #[error("deviation needs rank >= 2 and 0 <= t <= {horizon}, got rank {rank} at t={t}")]
    BadDeviation { t: usize, rank: usize, horizon: usize },
}

/// Read-only view of the game a strategy plays in.
#[derive(Clone, Copy)]
pub struct GameContext<'a> {
    pub spec: &'a InstanceSpec,
    pub meshes: &'a MeshSet,
}

impl<'a> GameContext<'a> {
    pub fn new(spec: &'a InstanceSpec, meshes: &'a MeshSet) -> Self {
        GameContext { spec, meshes }
    }

    /// Feasible Player vertices at `t`, ascending.
    pub fn player_actions(&self, t: usize, prev_vertex: Option<usize>, node: usize) -> Vec<usize> {
        let Some(body) = self.spec.body(t, node) else {
            return Vec::new();
        };
        let region = match prev_vertex {
            None => Some(body.clone()),
            Some(v) => {
                let x = self.meshes.vertex(t - 1, v);
                intersect_unchecked(&reach_unchecked(x, self.spec.rho(), self.spec.domain()), body)
            }
        };
        region.map_or_else(Vec::new, |r| self.meshes.at(t).query(&r))
    }

    /// Admissible Opponent nodes at `t`, ascending.
    pub fn opponent_actions(&self, t: usize, prev_node: Option<usize>) -> Vec<usize> {
        match prev_node {
            None if t == 0 => self.spec.active_nodes(0).to_vec(),
            Some(i) if t > 0 => self.spec.graph().succ(i).to_vec(),
            _ => Vec::new(),
        }
    }

    fn step_cost(&self, t: usize, prev_vertex: usize, vertex: usize) -> f64 {
        euclidean(self.meshes.vertex(t - 1, prev_vertex), self.meshes.vertex(t, vertex))
    }
}

pub trait PlayerStrategy {
    /// Chooses a vertex of `X̂_t` given the previous vertex (absent at `t = 0`)
    /// and the node just selected by the Opponent.
    fn choose(
        &mut self,
        ctx: &GameContext,
        t: usize,
        prev_vertex: Option<usize>,
        node: usize,
    ) -> Result<usize, PlayError>;
}

pub trait OpponentStrategy {
    /// Chooses the node for timestep `t` given the Player's previous vertex
    /// and the previous node (both absent at `t = 0`).
    fn choose(
        &mut self,
        ctx: &GameContext,
        t: usize,
        prev_vertex: Option<usize>,
        prev_node: Option<usize>,
    ) -> Result<usize, PlayError>;
}

/// Argmin/argmax tables read off the discretized value functions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTables {
    nodes: usize,
    initial_vertex: Vec<Option<usize>>,
    initial_node: usize,
    /// `player[t - 1][vertex * nodes + i_t]` -> vertex of `X̂_t`.
    player: Vec<Vec<Option<usize>>>,
    /// `opponent[t - 1][vertex * nodes + i_{t-1}]` -> node `i_t`.
    opponent: Vec<Vec<Option<usize>>>,
}

pub fn extract_policies(tables: &ValueTables) -> PolicyTables {
    let nodes = tables.node_count();
    let mut player = Vec::with_capacity(tables.horizon());
    let mut opponent = Vec::with_capacity(tables.horizon());
    for t in 1..=tables.horizon() {
        let stage = tables.stage(t).expect("stage within horizon");
        let width = stage
            .player_entries()
            .chain(stage.opponent_entries())
            .map(|(v, _, _)| v + 1)
            .max()
            .unwrap_or(0)
            * nodes;
        let mut p = vec![None; width];
        for (v, j, e) in stage.player_entries() {
            p[v * nodes + j] = Some(e.best);
        }
        let mut o = vec![None; width];
        for (v, i, e) in stage.opponent_entries() {
            o[v * nodes + i] = Some(e.best);
        }
        player.push(p);
        opponent.push(o);
    }
    PolicyTables {
        nodes,
        initial_vertex: (0..nodes).map(|i| tables.initial(i).map(|e| e.best)).collect(),
        initial_node: tables.root().best,
        player,
        opponent,
    }
}

impl PolicyTables {
    pub fn player_action(&self, t: usize, prev_vertex: Option<usize>, node: usize) -> Option<usize> {
        match (t, prev_vertex) {
            (0, None) => *self.initial_vertex.get(node)?,
            (t, Some(v)) if t > 0 => *self.player.get(t - 1)?.get(v * self.nodes + node)?,
            _ => None,
        }
    }

    pub fn opponent_action(&self, t: usize, prev_vertex: Option<usize>, prev_node: Option<usize>) -> Option<usize> {
        match (t, prev_vertex, prev_node) {
            (0, None, None) => Some(self.initial_node),
            (t, Some(v), Some(i)) if t > 0 => *self.opponent.get(t - 1)?.get(v * self.nodes + i)?,
            _ => None,
        }
    }
}

pub struct OptimalPlayer<'p>(pub &'p PolicyTables);

impl PlayerStrategy for OptimalPlayer<'_> {
    fn choose(
        &mut self,
        _: &GameContext,
        t: usize,
        prev_vertex: Option<usize>,
        node: usize,
    ) -> Result<usize, PlayError> {
        self.0
            .player_action(t, prev_vertex, node)
            .ok_or(PlayError::MissingEntry {
                t,
                vertex: prev_vertex,
                node,
            })
    }
}

pub struct OptimalOpponent<'p>(pub &'p PolicyTables);

impl OpponentStrategy for OptimalOpponent<'_> {
    fn choose(
        &mut self,
        _: &GameContext,
        t: usize,
        prev_vertex: Option<usize>,
        prev_node: Option<usize>,
    ) -> Result<usize, PlayError> {
        self.0
            .opponent_action(t, prev_vertex, prev_node)
            .ok_or(PlayError::MissingEntry {
                t,
                vertex: prev_vertex,
                node: prev_node.unwrap_or(usize::MAX),
            })
    }
}

/// Uniformly random feasible vertex at every step.
pub struct RandomPlayer {
    rng: ChaCha8Rng,
}

impl RandomPlayer {
    pub fn new(seed: u64) -> Self {
        RandomPlayer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl PlayerStrategy for RandomPlayer {
    fn choose(
        &mut self,
        ctx: &GameContext,
        t: usize,
        prev_vertex: Option<usize>,
        node: usize,
    ) -> Result<usize, PlayError> {
        let actions = ctx.player_actions(t, prev_vertex, node);
        if actions.is_empty() {
            return Err(PlayError::NoActions { t, node });
        }
        Ok(actions[self.rng.gen_range(0..actions.len())])
    }
}

/// Uniformly random admissible node at every step.
pub struct RandomOpponent {
    rng: ChaCha8Rng,
}

impl RandomOpponent {
    pub fn new(seed: u64) -> Self {
        RandomOpponent {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl OpponentStrategy for RandomOpponent {
    fn choose(
        &mut self,
        ctx: &GameContext,
        t: usize,
        _: Option<usize>,
        prev_node: Option<usize>,
    ) -> Result<usize, PlayError> {
        let actions = ctx.opponent_actions(t, prev_node);
        if actions.is_empty() {
            return Err(PlayError::NoActions {
                t,
                node: prev_node.unwrap_or(usize::MAX),
            });
        }
        Ok(actions[self.rng.gen_range(0..actions.len())])
    }
}

/// Myopic baseline: the feasible vertex closest to the previous position
/// (to the body center at `t = 0`), lowest id on ties.
pub struct GreedyPlayer;

pub fn greedy_player() -> GreedyPlayer {
    GreedyPlayer
}

impl PlayerStrategy for GreedyPlayer {
    fn choose(
        &mut self,
        ctx: &GameContext,
        t: usize,
        prev_vertex: Option<usize>,
        node: usize,
    ) -> Result<usize, PlayError> {
        let anchor: Point = match prev_vertex {
            Some(v) => Point::from(ctx.meshes.vertex(t - 1, v)),
            None => ctx.spec.body(t, node).ok_or(PlayError::NoActions { t, node })?.center(),
        };
        ctx.player_actions(t, prev_vertex, node)
            .into_iter()
            .map(|y| (euclidean(&anchor, ctx.meshes.vertex(t, y)), y))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, y)| y)
            .ok_or(PlayError::NoActions { t, node })
    }
}

/// Player actions at a state ranked best-first by their table value.
pub fn ranked_player_actions(
    ctx: &GameContext,
    tables: &ValueTables,
    t: usize,
    prev_vertex: Option<usize>,
    node: usize,
) -> Result<Vec<(f64, usize)>, PlayError> {
    let horizon = ctx.spec.horizon();
    let mut ranked = Vec::new();
    for y in ctx.player_actions(t, prev_vertex, node) {
        let tail = |stage: usize| {
            tables
                .opponent(stage, y, node)
                .map(|e| e.value)
                .ok_or(PlayError::MissingEntry {
                    t: stage,
                    vertex: Some(y),
                    node,
                })
        };
        let value = match prev_vertex {
            None => tail(1)?,
            Some(v) if t == horizon => ctx.step_cost(t, v, y),
            Some(v) => ctx.step_cost(t, v, y) + tail(t + 1)?,
        };
        ranked.push((value, y));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked)
}

/// Opponent actions at a state ranked best-first (highest value first).
pub fn ranked_opponent_actions(
    ctx: &GameContext,
    tables: &ValueTables,
    t: usize,
    prev_vertex: Option<usize>,
    prev_node: Option<usize>,
) -> Result<Vec<(f64, usize)>, PlayError> {
    let mut ranked = Vec::new();
    for j in ctx.opponent_actions(t, prev_node) {
        let entry = match prev_vertex {
            None => tables.initial(j),
            Some(v) => tables.player(t, v, j),
        };
        let value = entry
            .ok_or(PlayError::MissingEntry {
                t,
                vertex: prev_vertex,
                node: j,
            })?
            .value;
        ranked.push((value, j));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ranked)
}

fn check_deviation(tables: &ValueTables, at_t: usize, rank: usize) -> Result<(), PlayError> {
    let horizon = tables.horizon();
    if rank < 2 || at_t > horizon {
        return Err(PlayError::BadDeviation { t: at_t, rank, horizon });
    }
    Ok(())
}

/// Follows the policy except at one timestep, where it plays the `rank`-th
/// best action (clamped to the worst available one).
pub struct DeviatingPlayer<'a> {
    policy: &'a PolicyTables,
    tables: &'a ValueTables,
    at_t: usize,
    rank: usize,
    /// Set when the deviation step offered a single action.
    pub notice: bool,
}

pub fn deviate_player<'a>(
    policy: &'a PolicyTables,
    tables: &'a ValueTables,
    at_t: usize,
    rank: usize,
) -> Result<DeviatingPlayer<'a>, PlayError> {
    check_deviation(tables, at_t, rank)?;
    Ok(DeviatingPlayer {
        policy,
        tables,
        at_t,
        rank,
        notice: false,
    })
}

impl PlayerStrategy for DeviatingPlayer<'_> {
    fn choose(
        &mut self,
        ctx: &GameContext,
        t: usize,
        prev_vertex: Option<usize>,
        node: usize,
    ) -> Result<usize, PlayError> {
        if t != self.at_t {
            return OptimalPlayer(self.policy).choose(ctx, t, prev_vertex, node);
        }
        let ranked = ranked_player_actions(ctx, self.tables, t, prev_vertex, node)?;
        if ranked.len() <= 1 {
            self.notice = true;
            return OptimalPlayer(self.policy).choose(ctx, t, prev_vertex, node);
        }
        Ok(ranked[(self.rank - 1).min(ranked.len() - 1)].1)
    }
}

pub struct DeviatingOpponent<'a> {
    policy: &'a PolicyTables,
    tables: &'a ValueTables,
    at_t: usize,
    rank: usize,
    pub notice: bool,
}

pub fn deviate_opponent<'a>(
    policy: &'a PolicyTables,
    tables: &'a ValueTables,
    at_t: usize,
    rank: usize,
) -> Result<DeviatingOpponent<'a>, PlayError> {
    check_deviation(tables, at_t, rank)?;
    Ok(DeviatingOpponent {
        policy,
        tables,
        at_t,
        rank,
        notice: false,
    })
}

impl OpponentStrategy for DeviatingOpponent<'_> {
    fn choose(
        &mut self,
        ctx: &GameContext,
        t: usize,
        prev_vertex: Option<usize>,
        prev_node: Option<usize>,
    ) -> Result<usize, PlayError> {
        if t != self.at_t {
            return OptimalOpponent(self.policy).choose(ctx, t, prev_vertex, prev_node);
        }
        let ranked = ranked_opponent_actions(ctx, self.tables, t, prev_vertex, prev_node)?;
        if ranked.len() <= 1 {
            self.notice = true;
            return OptimalOpponent(self.policy).choose(ctx, t, prev_vertex, prev_node);
        }
        Ok(ranked[(self.rank - 1).min(ranked.len() - 1)].1)
    }
}

/// A realized play.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub nodes: Vec<usize>,
    pub vertices: Vec<usize>,
    pub points: Vec<Point>,
    /// `step_costs[t - 1] = c(x_{t-1}, x_t)` for `t = 1..=T`.
    pub step_costs: Vec<f64>,
    /// Sum of the step costs accumulated from the last step backwards, the
    /// same order in which backward induction adds them.
    pub total_cost: f64,
}

pub(crate) fn tail_sum(costs: &[f64]) -> f64 {
    costs.iter().rev().fold(0.0, |acc, c| c + acc)
}

impl Trajectory {
    /// Replays the trajectory against the instance rules.
    pub fn check(&self, spec: &InstanceSpec) -> Result<(), String> {
        let horizon = spec.horizon();
        if self.nodes.len() != horizon + 1 || self.points.len() != horizon + 1 || self.step_costs.len() != horizon {
            return Err("trajectory length does not match the horizon".into());
        }
        if tail_sum(&self.step_costs) != self.total_cost {
            return Err("total cost differs from the summed step costs".into());
        }
        for t in 0..=horizon {
            let node = self.nodes[t];
            let body = spec.body(t, node).ok_or(format!("t={t}: node {node} has no body"))?;
            if !body.contains(&self.points[t]) {
                return Err(format!("t={t}: point {} outside body of node {node}", self.points[t]));
            }
            if t == 0 {
                continue;
            }
            if !spec.graph().has_edge(self.nodes[t - 1], node) {
                return Err(format!("t={t}: ({}, {node}) is not an edge", self.nodes[t - 1]));
            }
            let reach = reach_unchecked(&self.points[t - 1], spec.rho(), spec.domain());
            if !reach.contains(&self.points[t]) {
                return Err(format!("t={t}: move exceeds the reach radius"));
            }
            if euclidean(&self.points[t - 1], &self.points[t]) != self.step_costs[t - 1] {
                return Err(format!("t={t}: step cost mismatch"));
            }
        }
        Ok(())
    }

    /// CSV with header `t,node,vertex_id,x0..x{d-1},step_cost`; `step_cost` is 0 at `t = 0`.
    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, Point::dim);
        let mut out = String::from("t,node,vertex_id");
        for k in 0..d {
            let _ = write!(out, ",x{k}");
        }
        out.push_str(",step_cost\n");
        for t in 0..self.nodes.len() {
            let _ = write!(out, "{t},{},{}", self.nodes[t], self.vertices[t]);
            for c in self.points[t].iter() {
                let _ = write!(out, ",{c}");
            }
            let step = if t == 0 { 0.0 } else { self.step_costs[t - 1] };
            let _ = writeln!(out, ",{step}");
        }
        out
    }
}

/// Plays one game and validates every move.
pub fn simulate(
    ctx: &GameContext,
    player: &mut dyn PlayerStrategy,
    opponent: &mut dyn OpponentStrategy,
) -> Result<Trajectory, PlayError> {
    let spec = ctx.spec;
    let mut nodes = Vec::with_capacity(spec.horizon() + 1);
    let mut vertices: Vec<usize> = Vec::with_capacity(spec.horizon() + 1);
    let mut step_costs = Vec::with_capacity(spec.horizon());
    for t in 0..=spec.horizon() {
        let prev_vertex = vertices.last().copied();
        let prev_node = nodes.last().copied();
        let node = opponent.choose(ctx, t, prev_vertex, prev_node)?;
        if !ctx.opponent_actions(t, prev_node).contains(&node) {
            return Err(PlayError::InvalidNode {
                t,
                node,
                prev: prev_node,
            });
        }
        let vertex = player.choose(ctx, t, prev_vertex, node)?;
        let feasible = vertex < ctx.meshes.len(t)
            && spec
                .body(t, node)
                .is_some_and(|b| b.contains(ctx.meshes.vertex(t, vertex)))
            && prev_vertex.is_none_or(|v| {
                reach_unchecked(ctx.meshes.vertex(t - 1, v), spec.rho(), spec.domain())
                    .contains(ctx.meshes.vertex(t, vertex))
            });
        if !feasible {
            return Err(PlayError::InfeasibleVertex { t, vertex, node });
        }
        if let Some(v) = prev_vertex {
            step_costs.push(ctx.step_cost(t, v, vertex));
        }
        nodes.push(node);
        vertices.push(vertex);
    }
    let points = vertices
        .iter()
        .enumerate()
        .map(|(t, &v)| Point::from(ctx.meshes.vertex(t, v)))
        .collect();
    let total_cost = tail_sum(&step_costs);
    Ok(Trajectory {
        nodes,
        vertices,
        points,
        step_costs,
        total_cost,
    })
}
