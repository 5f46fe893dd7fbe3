//! Query answering on a road graph with a region-level trip model.
//!
//! A query (s, t) conditions the diagram on the terminals of the two
//! endpoint regions, samples a region trip, and returns the shortest road
//! trip inside the union of the sampled regions. Samples whose regions do
//! not connect s to t are rejected and redrawn.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::{compile_cnf, smooth, validate, CompileError, CompileOptions, ProbDiagram};
use crate::encode::{encode_relaxed, trip_to_assignment, Assignment, EncodeError, VarMap};
use crate::graph::{dijkstra_indices, is_simple_trip, project_trip, Abstraction, GraphError, RoadGraph, Trip, VertexId};
use crate::inference::{compute_prob, finalize_params, prob_learn, InferenceError, Sampler};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("vertex {0} is not in the road graph")]
    UnknownVertex(VertexId),
    #[error("query endpoints coincide ({0})")]
    SameVertex(VertexId),
    #[error("query endpoints share region {0}")]
    SameRegion(VertexId),
    #[error("no region trip connects regions {0} and {1}")]
    Unsatisfiable(VertexId, VertexId),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("refinement failed: {0}")]
    Refine(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Inference(InferenceError),
}

impl From<InferenceError> for RouteError {
    fn from(e: InferenceError) -> Self {
        RouteError::Inference(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteQuery {
    pub s: VertexId,
    pub t: VertexId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "single-pass")]
    SinglePass,
    #[serde(rename = "stepwise")]
    Stepwise,
    #[serde(rename = "shortest")]
    Shortest,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SinglePass, Method::Stepwise, Method::Shortest];

    pub fn name(self) -> &'static str {
        match self {
            Method::SinglePass => "single-pass",
            Method::Stepwise => "stepwise",
            Method::Shortest => "shortest",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub max_attempts: usize,
    pub time_budget: Duration,
    pub k_per_attempt: usize,
    pub seed: u64,
}

impl SampleConfig {
    pub const DEFAULT_MAX_ATTEMPTS: usize = 400;
    pub const DEFAULT_TIME_BUDGET: Duration = Duration::from_secs(300);

    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            max_attempts: Self::DEFAULT_MAX_ATTEMPTS,
            time_budget: Self::DEFAULT_TIME_BUDGET,
            k_per_attempt: 1,
            seed: 0,
        }
    }
}

/// Result of one query. `trip` is `None` when the attempt or time budget
/// ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteOutcome {
    pub trip: Option<Trip>,
    pub region_trip: Option<Trip>,
    pub attempts: usize,
    pub elapsed: Duration,
    pub method: Method,
}

/// Counts from feeding road trips to a model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainingStats {
    pub trained: u64,
    /// Region trip is simple but its assignment violates the encoding.
    pub rejected: u64,
    pub single_region: u64,
    pub not_simple: u64,
}

/// Road graph, its abstraction, and a smooth diagram over the region
/// graph's encoding.
#[derive(Debug, Clone)]
pub struct RouteModel {
    road: RoadGraph,
    abstraction: Abstraction,
    diagram: ProbDiagram,
    var_map: VarMap,
    /// Dense region index per dense road index.
    road_region: Vec<usize>,
}

impl RouteModel {
    pub fn new(road: RoadGraph, abstraction: Abstraction, diagram: ProbDiagram) -> Result<Self, RouteError> {
        abstraction.check_against(&road)?;
        let var_map = VarMap::new(abstraction.region_count());
        if diagram.num_vars() != var_map.num_vars() {
            return Err(RouteError::Model(format!(
                "diagram has {} variables, {} regions need {}",
                diagram.num_vars(),
                abstraction.region_count(),
                var_map.num_vars()
            )));
        }
        let report = validate(&diagram);
        if !report.all_hold() {
            return Err(RouteError::Model(format!("diagram fails validation:\n{report}")));
        }
        if !diagram.root_scope_complete() {
            return Err(RouteError::Model("diagram root does not mention every variable".into()));
        }
        let region_graph = &abstraction.region_graph;
        let road_region = road
            .vertices()
            .iter()
            .map(|v| region_graph.index_of(abstraction.region_of(v.id).expect("checked above")).expect("region exists"))
            .collect();
        Ok(Self { road, abstraction, diagram, var_map, road_region })
    }

    /// Encodes and compiles the region graph; parameters start uniform.
    pub fn compile(road: RoadGraph, abstraction: Abstraction, opts: Option<CompileOptions>) -> Result<Self, RouteError> {
        let f = encode_relaxed(&abstraction.region_graph)?;
        let opts = opts.unwrap_or_else(|| CompileOptions::for_formula(&f));
        let mut d = smooth(&compile_cnf(&f, &opts)?).map_err(CompileError::from)?;
        finalize_params(&mut d);
        Self::new(road, abstraction, d)
    }

    pub fn road(&self) -> &RoadGraph {
        &self.road
    }

    pub fn abstraction(&self) -> &Abstraction {
        &self.abstraction
    }

    pub fn diagram(&self) -> &ProbDiagram {
        &self.diagram
    }

    pub fn into_diagram(self) -> ProbDiagram {
        self.diagram
    }

    pub fn var_map(&self) -> VarMap {
        self.var_map
    }

    fn region_graph(&self) -> &RoadGraph {
        &self.abstraction.region_graph
    }

    fn region_index(&self, road_vertex: VertexId) -> Result<usize, RouteError> {
        let i = self.road.index_of(road_vertex).ok_or(RouteError::UnknownVertex(road_vertex))?;
        Ok(self.road_region[i])
    }

    /// Region-trip assignment for a road trip, or the reason it is skipped.
    fn training_assignment(&self, trip: &Trip) -> Result<Result<Assignment, Skip>, RouteError> {
        let regions = project_trip(&self.abstraction, trip)?;
        if regions.len() < 2 {
            return Ok(Err(Skip::SingleRegion));
        }
        if !is_simple_trip(self.region_graph(), &regions)? {
            return Ok(Err(Skip::NotSimple));
        }
        Ok(Ok(trip_to_assignment(self.region_graph(), &regions)?))
    }

    /// Adds the trips to the diagram's counters and refreshes parameters.
    pub fn train(&mut self, trips: &[Trip]) -> Result<TrainingStats, RouteError> {
        let mut stats = TrainingStats::default();
        for trip in trips {
            match self.training_assignment(trip)? {
                Err(Skip::SingleRegion) => stats.single_region += 1,
                Err(Skip::NotSimple) => stats.not_simple += 1,
                Ok(a) => match prob_learn(&mut self.diagram, &a) {
                    Ok(()) => stats.trained += 1,
                    Err(InferenceError::Rejected(_)) => stats.rejected += 1,
                    Err(e) => return Err(e.into()),
                },
            }
        }
        finalize_params(&mut self.diagram);
        Ok(stats)
    }

    fn check_query(&self, q: RouteQuery) -> Result<(usize, usize), RouteError> {
        let rs = self.region_index(q.s)?;
        let rt = self.region_index(q.t)?;
        if q.s == q.t {
            return Err(RouteError::SameVertex(q.s));
        }
        Ok((rs, rt))
    }

    /// Binds the terminal variables of the two endpoint regions to true.
    pub fn build_query_assignment(&self, q: RouteQuery) -> Result<Assignment, RouteError> {
        let (rs, rt) = self.check_query(q)?;
        if rs == rt {
            return Err(RouteError::SameRegion(self.region_graph().id_at(rs)));
        }
        let mut a = Assignment::empty(self.var_map.num_vars());
        a.set(self.var_map.s_var(rs), true);
        a.set(self.var_map.s_var(rt), true);
        Ok(a)
    }

    /// Region trip from `start` to `end` contained in a satisfying
    /// assignment; other components (cycles) are dropped.
    pub fn refine(&self, sigma: &Assignment, start: VertexId, end: VertexId) -> Result<Trip, RouteError> {
        refine_assignment(self.region_graph(), &self.var_map, sigma, start, end)
    }

    /// Shortest road trip from s to t inside the union of the given regions
    /// (dense indices).
    fn expand(&self, regions: &[usize], q: RouteQuery) -> Option<Trip> {
        let mut allowed = vec![false; self.region_graph().vertex_count()];
        for &r in regions {
            allowed[r] = true;
        }
        let s = self.road.index_of(q.s)?;
        let t = self.road.index_of(q.t)?;
        let path = dijkstra_indices(&self.road, s, t, |i| allowed[self.road_region[i]])?;
        Some(Trip::new(path.into_iter().map(|i| self.road.id_at(i)).collect()))
    }

    fn same_region(&self, q: RouteQuery, r: usize, method: Method, started: Instant) -> RouteOutcome {
        RouteOutcome {
            trip: self.expand(&[r], q),
            region_trip: Some(Trip::new(vec![self.region_graph().id_at(r)])),
            attempts: 0,
            elapsed: started.elapsed(),
            method,
        }
    }

    /// Rejection loop shared by both sampling methods. `draw` returns a
    /// region trip as dense indices, or `None` for a rejected draw.
    fn rejection_loop(
        &self,
        q: RouteQuery,
        cfg: &SampleConfig,
        method: Method,
        started: Instant,
        mut draw: impl FnMut(&mut ChaCha8Rng) -> Result<Option<Vec<usize>>, RouteError>,
    ) -> Result<RouteOutcome, RouteError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut attempts = 0;
        while attempts < cfg.max_attempts && started.elapsed() < cfg.time_budget {
            attempts += 1;
            for _ in 0..cfg.k_per_attempt.max(1) {
                let Some(regions) = draw(&mut rng)? else { continue };
                if let Some(trip) = self.expand(&regions, q) {
                    let ids = regions.iter().map(|&r| self.region_graph().id_at(r)).collect();
                    return Ok(RouteOutcome {
                        trip: Some(trip),
                        region_trip: Some(Trip::new(ids)),
                        attempts,
                        elapsed: started.elapsed(),
                        method,
                    });
                }
            }
        }
        Ok(RouteOutcome { trip: None, region_trip: None, attempts, elapsed: started.elapsed(), method })
    }

    /// Single-pass sampling: one conditioned diagram sample per draw.
    pub fn sample_route(&self, q: RouteQuery, cfg: &SampleConfig) -> Result<RouteOutcome, RouteError> {
        let started = Instant::now();
        let (rs, rt) = self.check_query(q)?;
        if rs == rt {
            return Ok(self.same_region(q, rs, Method::SinglePass, started));
        }
        let cond = self.build_query_assignment(q)?;
        let sampler = match Sampler::with_trusted_scope(&self.diagram, &cond) {
            Ok(s) => s,
            Err(InferenceError::UnsatisfiableCondition) => return Err(self.unsatisfiable(rs, rt)),
            Err(e) => return Err(e.into()),
        };
        let (start, end) = (self.region_graph().id_at(rs), self.region_graph().id_at(rt));
        self.rejection_loop(q, cfg, Method::SinglePass, started, |rng| {
            let sigma = sampler.sample(rng);
            let trip = self.refine(&sigma, start, end)?;
            Ok(Some(trip.vertices.iter().map(|&r| self.region_graph().index_of(r).expect("region id")).collect()))
        })
    }

    /// Stepwise sampling: extends the region trip one neighbor at a time,
    /// weighting each candidate by the marginal probability of the partial
    /// trip with that candidate added.
    pub fn stepwise_sample_route(&self, q: RouteQuery, cfg: &SampleConfig) -> Result<RouteOutcome, RouteError> {
        let started = Instant::now();
        let (rs, rt) = self.check_query(q)?;
        if rs == rt {
            return Ok(self.same_region(q, rs, Method::Stepwise, started));
        }
        let mut base = self.build_query_assignment(q)?;
        base.set(self.var_map.n_var(rs), true);
        base.set(self.var_map.n_var(rt), true);
        if compute_prob(&self.diagram, &base)? == 0.0 {
            return Err(self.unsatisfiable(rs, rt));
        }
        self.rejection_loop(q, cfg, Method::Stepwise, started, |rng| self.stepwise_draw(&base, rs, rt, rng))
    }

    fn stepwise_draw(
        &self,
        base: &Assignment,
        rs: usize,
        rt: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<Vec<usize>>, RouteError> {
        let g = self.region_graph();
        let vm = &self.var_map;
        let mut partial = base.clone();
        let mut path = vec![rs];
        let mut current = rs;
        while current != rt {
            let candidates: Vec<usize> =
                g.neighbors_of_index(current).filter(|&r| partial.get(vm.n_var(r)) != Some(false) && !path.contains(&r)).collect();
            let mut weights = Vec::with_capacity(candidates.len());
            for &r in &candidates {
                let mut next = partial.clone();
                next.set(vm.n_var(r), true);
                weights.push(compute_prob(&self.diagram, &next)?);
            }
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Ok(None);
            }
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = *candidates.last().expect("total > 0 implies a candidate");
            for (&r, &w) in candidates.iter().zip(&weights) {
                if w > 0.0 && u < w {
                    chosen = r;
                    break;
                }
                u -= w;
            }
            // The current region has no further trip neighbors.
            for &r in &candidates {
                if r != chosen {
                    partial.set(vm.n_var(r), false);
                }
            }
            partial.set(vm.n_var(chosen), true);
            path.push(chosen);
            current = chosen;
        }
        Ok(Some(path))
    }

    /// Dijkstra on the full road graph.
    pub fn baseline_shortest(&self, q: RouteQuery) -> Result<RouteOutcome, RouteError> {
        let started = Instant::now();
        self.check_query(q)?;
        let s = self.road.index_of(q.s).ok_or(RouteError::UnknownVertex(q.s))?;
        let t = self.road.index_of(q.t).ok_or(RouteError::UnknownVertex(q.t))?;
        let trip = dijkstra_indices(&self.road, s, t, |_| true).map(|p| Trip::new(p.into_iter().map(|i| self.road.id_at(i)).collect()));
        Ok(RouteOutcome { trip, region_trip: None, attempts: 0, elapsed: started.elapsed(), method: Method::Shortest })
    }

    pub fn run(&self, method: Method, q: RouteQuery, cfg: &SampleConfig) -> Result<RouteOutcome, RouteError> {
        match method {
            Method::SinglePass => self.sample_route(q, cfg),
            Method::Stepwise => self.stepwise_sample_route(q, cfg),
            Method::Shortest => self.baseline_shortest(q),
        }
    }

    fn unsatisfiable(&self, rs: usize, rt: usize) -> RouteError {
        RouteError::Unsatisfiable(self.region_graph().id_at(rs), self.region_graph().id_at(rt))
    }
}

enum Skip {
    SingleRegion,
    NotSimple,
}

/// Walks from `start` through n-true vertices, always to the single
/// unvisited n-true neighbor, until `end`.
pub fn refine_assignment(
    g: &RoadGraph,
    vm: &VarMap,
    sigma: &Assignment,
    start: VertexId,
    end: VertexId,
) -> Result<Trip, RouteError> {
    let si = g.index_of(start).ok_or(RouteError::UnknownVertex(start))?;
    let ei = g.index_of(end).ok_or(RouteError::UnknownVertex(end))?;
    let on = |i: usize| sigma.get(vm.n_var(i)) == Some(true);
    for i in 0..g.vertex_count() {
        let terminal = sigma.get(vm.s_var(i)) == Some(true);
        if terminal != (i == si || i == ei) {
            return Err(RouteError::Refine(format!(
                "terminal variables do not match endpoints {start} and {end} (vertex {})",
                g.id_at(i)
            )));
        }
    }
    if !on(si) {
        return Err(RouteError::Refine(format!("start {start} is not on the trip")));
    }
    let mut visited = vec![false; g.vertex_count()];
    visited[si] = true;
    let mut path = vec![si];
    let mut current = si;
    while current != ei {
        let mut next = g.neighbors_of_index(current).filter(|&n| on(n) && !visited[n]);
        let Some(n) = next.next() else {
            return Err(RouteError::Refine(format!("trip ends at {} before reaching {end}", g.id_at(current))));
        };
        if next.next().is_some() {
            return Err(RouteError::Refine(format!("trip branches at {}", g.id_at(current))));
        }
        visited[n] = true;
        path.push(n);
        current = n;
    }
    Ok(Trip::new(path.into_iter().map(|i| g.id_at(i)).collect()))
}

/// Per-query seed derived from a run seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{abstract_graph, build_grid_graph, Edge, Vertex};
    use std::collections::HashSet;

    fn grid_model(n: usize, cell: f64) -> RouteModel {
        let road = build_grid_graph(n, n, 1.0);
        let a = abstract_graph(&road, cell).unwrap();
        RouteModel::compile(road, a, None).unwrap()
    }

    fn check_trip(m: &RouteModel, q: RouteQuery, trip: &Trip) {
        assert_eq!(trip.first(), Some(q.s));
        assert_eq!(trip.last(), Some(q.t));
        m.road().check_path(trip).unwrap();
    }

    #[test]
    fn query_assignment_binds_two_terminals() {
        let m = grid_model(4, 2.0);
        let a = m.build_query_assignment(RouteQuery { s: 0, t: 15 }).unwrap();
        assert_eq!(a.bound_count(), 2);
        let vm = m.var_map();
        assert_eq!(a.get(vm.s_var(0)), Some(true));
        assert_eq!(a.get(vm.s_var(3)), Some(true));
        assert!(matches!(m.build_query_assignment(RouteQuery { s: 0, t: 1 }), Err(RouteError::SameRegion(0))));
        assert!(matches!(m.build_query_assignment(RouteQuery { s: 0, t: 99 }), Err(RouteError::UnknownVertex(99))));
    }

    #[test]
    fn refine_inverts_trip_encoding() {
        let g = build_grid_graph(3, 3, 1.0);
        let vm = VarMap::new(9);
        let trip = Trip::new(vec![0, 1, 2, 5]);
        let sigma = trip_to_assignment(&g, &trip).unwrap();
        assert_eq!(refine_assignment(&g, &vm, &sigma, 0, 5).unwrap(), trip);
        let edge = Trip::new(vec![4, 7]);
        let sigma = trip_to_assignment(&g, &edge).unwrap();
        assert_eq!(refine_assignment(&g, &vm, &sigma, 4, 7).unwrap(), edge);
    }

    #[test]
    fn refine_drops_disjoint_cycle() {
        // 4x3 grid: path 0-1 (top left), cycle 6-7-11-10 on the right.
        let g = build_grid_graph(4, 3, 1.0);
        let vm = VarMap::new(12);
        let f = encode_relaxed(&g).unwrap();
        let mut sigma = Assignment::empty(vm.num_vars());
        for i in 0..12 {
            sigma.set(vm.n_var(i), [0, 1, 6, 7, 10, 11].contains(&i));
            sigma.set(vm.s_var(i), i == 0 || i == 1);
        }
        assert!(f.is_satisfied_by(&sigma));
        assert_eq!(refine_assignment(&g, &vm, &sigma, 0, 1).unwrap(), Trip::new(vec![0, 1]));
    }

    #[test]
    fn refine_reports_broken_structure() {
        let g = build_grid_graph(3, 1, 1.0);
        let vm = VarMap::new(3);
        let sigma = Assignment::from_lits(6, &[1, -2, 3, 4, -5, 6]);
        assert!(matches!(refine_assignment(&g, &vm, &sigma, 0, 2), Err(RouteError::Refine(_))));
    }

    #[test]
    fn sampled_routes_are_valid() {
        let m = grid_model(8, 2.0);
        for (i, q) in [(0, 63), (7, 56), (63, 0), (3, 60)].into_iter().enumerate() {
            let q = RouteQuery { s: q.0, t: q.1 };
            let cfg = SampleConfig::with_seed(derive_seed(5, i as u64));
            for out in [m.sample_route(q, &cfg).unwrap(), m.stepwise_sample_route(q, &cfg).unwrap()] {
                let trip = out.trip.expect("grid regions are connected");
                check_trip(&m, q, &trip);
                assert!(out.attempts >= 1);
                let rt = out.region_trip.unwrap();
                assert!(is_simple_trip(&m.abstraction().region_graph, &rt).unwrap());
            }
        }
    }

    #[test]
    fn same_region_query_bypasses_sampling() {
        let m = grid_model(4, 2.0);
        let q = RouteQuery { s: 0, t: 5 };
        let out = m.sample_route(q, &SampleConfig::default()).unwrap();
        assert_eq!(out.attempts, 0);
        let trip = out.trip.unwrap();
        check_trip(&m, q, &trip);
        assert_eq!(trip.len(), 3);
        assert!(trip.vertices.iter().all(|&v| [0, 1, 4, 5].contains(&v)));
    }

    #[test]
    fn isolated_region_is_unsatisfiable() {
        // Two components: a 2x2 block and a far-away edge.
        let mut vertices: Vec<Vertex> = build_grid_graph(2, 2, 1.0).vertices().to_vec();
        let mut edges: Vec<Edge> = build_grid_graph(2, 2, 1.0).edges().to_vec();
        vertices.push(Vertex { id: 4, x: 10.0, y: 0.0 });
        vertices.push(Vertex { id: 5, x: 12.0, y: 0.0 });
        edges.push(Edge { u: 4, v: 5, length: 2.0 });
        let road = RoadGraph::new(vertices, edges).unwrap();
        let a = abstract_graph(&road, 1.0).unwrap();
        let m = RouteModel::compile(road, a, None).unwrap();
        let q = RouteQuery { s: 0, t: 5 };
        assert!(matches!(m.sample_route(q, &SampleConfig::default()), Err(RouteError::Unsatisfiable(..))));
        assert!(matches!(m.stepwise_sample_route(q, &SampleConfig::default()), Err(RouteError::Unsatisfiable(..))));
    }

    /// Regions 0 = {s, a}, 1 = {t}, 2 = {c} form a triangle. s reaches t only
    /// through c, but the only satisfiable region trip is 0-1 (0-2-1 gives
    /// terminal 0 two trip neighbors), so every draw is rejected.
    fn unreachable_model() -> RouteModel {
        let vertices = vec![
            Vertex { id: 0, x: 0.0, y: 0.0 },
            Vertex { id: 1, x: 0.5, y: 0.0 },
            Vertex { id: 2, x: 1.5, y: 0.0 },
            Vertex { id: 3, x: 0.0, y: 1.5 },
        ];
        let edges = vec![
            Edge { u: 1, v: 2, length: 1.0 },
            Edge { u: 0, v: 3, length: 1.5 },
            Edge { u: 3, v: 2, length: 2.2 },
        ];
        let road = RoadGraph::new(vertices, edges).unwrap();
        let a = abstract_graph(&road, 1.0).unwrap();
        RouteModel::compile(road, a, None).unwrap()
    }

    #[test]
    fn rejected_draws_exhaust_budget() {
        let m = unreachable_model();
        let q = RouteQuery { s: 0, t: 2 };
        let cfg = SampleConfig { max_attempts: 7, ..SampleConfig::default() };
        for out in [m.sample_route(q, &cfg).unwrap(), m.stepwise_sample_route(q, &cfg).unwrap()] {
            assert_eq!((out.trip, out.attempts), (None, 7));
        }
        let zero_time = SampleConfig { time_budget: Duration::ZERO, ..cfg };
        assert_eq!(m.sample_route(q, &zero_time).unwrap().attempts, 0);
    }

    #[test]
    fn same_region_without_inner_path() {
        let m = unreachable_model();
        let out = m.sample_route(RouteQuery { s: 0, t: 1 }, &SampleConfig::default()).unwrap();
        assert_eq!((out.trip, out.attempts), (None, 0));
    }

    #[test]
    fn baseline_matches_dijkstra() {
        let m = grid_model(6, 3.0);
        let q = RouteQuery { s: 0, t: 35 };
        let out = m.baseline_shortest(q).unwrap();
        let expected = crate::graph::shortest_path(m.road(), 0, 35, &HashSet::new()).unwrap();
        assert_eq!(out.trip, expected);
    }

    #[test]
    fn training_shifts_samples_towards_data() {
        let road = build_grid_graph(4, 4, 1.0);
        let a = abstract_graph(&road, 2.0).unwrap();
        let mut m = RouteModel::compile(road, a, None).unwrap();
        // Region 0 -> 1 -> 3 via road vertices along the top then right.
        let trip = Trip::new(vec![0, 1, 2, 3, 7, 11, 15]);
        let stats = m.train(&vec![trip; 30]).unwrap();
        assert_eq!(stats.trained, 30);
        let q = RouteQuery { s: 0, t: 15 };
        let via_1 = (0..200)
            .filter(|&i| {
                let out = m.sample_route(q, &SampleConfig::with_seed(i)).unwrap();
                out.region_trip.unwrap().vertices == [0, 1, 3]
            })
            .count();
        assert!(via_1 > 150, "{via_1}");
        let single = m.train(&[Trip::new(vec![0, 1])]).unwrap();
        assert_eq!(single.single_region, 1);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let m = grid_model(8, 2.0);
        let q = RouteQuery { s: 0, t: 63 };
        let cfg = SampleConfig::with_seed(42);
        let a = m.sample_route(q, &cfg).unwrap();
        let b = m.sample_route(q, &cfg).unwrap();
        assert_eq!((a.trip, a.attempts), (b.trip, b.attempts));
        let a = m.stepwise_sample_route(q, &cfg).unwrap();
        let b = m.stepwise_sample_route(q, &cfg).unwrap();
        assert_eq!((a.trip, a.attempts), (b.trip, b.attempts));
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
