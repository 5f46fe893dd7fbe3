//! Road graphs, region abstractions, shortest paths and synthetic trips.
//!
//! Vertex ids are arbitrary integers as they appear in the input files.
//! Internally every vertex also has a dense index (its rank in ascending id
//! order); encodings and adjacency are expressed over those indices.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("unknown vertex id {0}")]
    UnknownVertex(VertexId),
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(VertexId, VertexId),
    #[error("trip is empty")]
    EmptyTrip,
    #[error("trip generation gave up after {attempts} attempts ({produced} trips produced)")]
    GenerationExhausted { attempts: usize, produced: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub length: f64,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<Vertex>,
    edges: Vec<Edge>,
}

/// Undirected weighted graph with coordinates.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    index: FxHashMap<VertexId, usize>,
    /// Neighbor lists over dense indices, sorted by neighbor index.
    adj: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for RoadGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges
    }
}

impl RoadGraph {
    /// Builds and validates a graph. Vertices are reordered by ascending id.
    pub fn new(mut vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        vertices.sort_by_key(|v| v.id);
        let mut index = FxHashMap::default();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.id, i).is_some() {
                return Err(GraphError::Invalid(format!("duplicate vertex id {}", v.id)));
            }
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(GraphError::Invalid(format!("vertex {} has non-finite coordinates", v.id)));
            }
        }
        let mut adj = vec![Vec::new(); vertices.len()];
        let mut seen = HashSet::new();
        for e in &edges {
            let iu = *index
                .get(&e.u)
                .ok_or_else(|| GraphError::Invalid(format!("edge ({}, {}) references unknown vertex {}", e.u, e.v, e.u)))?;
            let iv = *index
                .get(&e.v)
                .ok_or_else(|| GraphError::Invalid(format!("edge ({}, {}) references unknown vertex {}", e.u, e.v, e.v)))?;
            if iu == iv {
                return Err(GraphError::Invalid(format!("self-loop at vertex {}", e.u)));
            }
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(GraphError::Invalid(format!("edge ({}, {}) has nonpositive length {}", e.u, e.v, e.length)));
            }
            if !seen.insert((iu.min(iv), iu.max(iv))) {
                return Err(GraphError::Invalid(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
            adj[iu].push((iv, e.length));
            adj[iv].push((iu, e.length));
        }
        for list in &mut adj {
            list.sort_by_key(|&(n, _)| n);
        }
        Ok(Self { vertices, edges, index, adj })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Dense index of a vertex id.
    pub fn index_of(&self, id: VertexId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    fn require(&self, id: VertexId) -> Result<usize, GraphError> {
        self.index_of(id).ok_or(GraphError::UnknownVertex(id))
    }

    pub fn id_at(&self, index: usize) -> VertexId {
        self.vertices[index].id
    }

    pub fn vertex_at(&self, index: usize) -> &Vertex {
        &self.vertices[index]
    }

    pub fn vertex(&self, id: VertexId) -> Option<&Vertex> {
        self.index_of(id).map(|i| &self.vertices[i])
    }

    /// Neighbor indices of the vertex at `index`, ascending.
    pub fn neighbors_of_index(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[index].iter().map(|&(n, _)| n)
    }

    pub fn degree_of_index(&self, index: usize) -> usize {
        self.adj[index].len()
    }

    /// Neighbor ids of `id`, ascending.
    pub fn neighbors(&self, id: VertexId) -> Result<Vec<VertexId>, GraphError> {
        let i = self.require(id)?;
        Ok(self.adj[i].iter().map(|&(n, _)| self.vertices[n].id).collect())
    }

    pub fn are_adjacent(&self, a: VertexId, b: VertexId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(ia), Some(ib)) => self.adjacent_indices(ia, ib),
            _ => false,
        }
    }

    pub(crate) fn adjacent_indices(&self, ia: usize, ib: usize) -> bool {
        self.adj[ia].binary_search_by_key(&ib, |&(n, _)| n).is_ok()
    }

    pub fn edge_length(&self, a: VertexId, b: VertexId) -> Option<f64> {
        let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
        self.adj[ia]
            .binary_search_by_key(&ib, |&(n, _)| n)
            .ok()
            .map(|pos| self.adj[ia][pos].1)
    }

    /// Total length of a trip; errors on non-adjacent consecutive vertices.
    pub fn trip_length(&self, trip: &Trip) -> Result<f64, GraphError> {
        trip.vertices
            .windows(2)
            .map(|w| self.edge_length(w[0], w[1]).ok_or(GraphError::NotAdjacent(w[0], w[1])))
            .sum()
    }

    /// Median edge length, the default match tolerance.
    pub fn median_edge_length(&self) -> f64 {
        let mut lengths: Vec<f64> = self.edges.iter().map(|e| e.length).collect();
        if lengths.is_empty() {
            return 0.0;
        }
        lengths.sort_by(f64::total_cmp);
        let n = lengths.len();
        if n % 2 == 1 {
            lengths[n / 2]
        } else {
            0.5 * (lengths[n / 2 - 1] + lengths[n / 2])
        }
    }

    /// Checks that consecutive trip vertices exist and are adjacent.
    pub fn check_path(&self, trip: &Trip) -> Result<(), GraphError> {
        if trip.vertices.is_empty() {
            return Err(GraphError::EmptyTrip);
        }
        for &v in &trip.vertices {
            self.require(v)?;
        }
        for w in trip.vertices.windows(2) {
            if !self.are_adjacent(w[0], w[1]) {
                return Err(GraphError::NotAdjacent(w[0], w[1]));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile { nodes: self.vertices.clone(), edges: self.edges.clone() };
        serde_json::to_string_pretty(&file).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        Self::new(file.nodes, file.edges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Reads a graph JSON file and validates it.
pub fn load_graph(path: impl AsRef<Path>) -> Result<RoadGraph, GraphError> {
    RoadGraph::from_json(&fs::read_to_string(path)?)
}

/// `width` x `height` lattice; vertex (r, c) has id `r * width + c` and sits
/// at `(c * spacing, r * spacing)`.
pub fn build_grid_graph(width: usize, height: usize, spacing: f64) -> RoadGraph {
    assert!(width >= 1 && height >= 1, "grid dimensions must be positive");
    assert!(spacing > 0.0, "grid spacing must be positive");
    let id = |r: usize, c: usize| r * width + c;
    let mut vertices = Vec::with_capacity(width * height);
    let mut edges = Vec::new();
    for r in 0..height {
        for c in 0..width {
            vertices.push(Vertex { id: id(r, c), x: c as f64 * spacing, y: r as f64 * spacing });
            if c + 1 < width {
                edges.push(Edge { u: id(r, c), v: id(r, c + 1), length: spacing });
            }
            if r + 1 < height {
                edges.push(Edge { u: id(r, c), v: id(r + 1, c), length: spacing });
            }
        }
    }
    RoadGraph::new(vertices, edges).expect("lattice is always a valid graph")
}

/// Ordered sequence of vertex ids; serialized as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trip {
    pub vertices: Vec<VertexId>,
}

impl Trip {
    pub fn new(vertices: Vec<VertexId>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn first(&self) -> Option<VertexId> {
        self.vertices.first().copied()
    }

    pub fn last(&self) -> Option<VertexId> {
        self.vertices.last().copied()
    }

    /// Terminal vertices (first, last).
    pub fn terminals(&self) -> Option<(VertexId, VertexId)> {
        Some((self.first()?, self.last()?))
    }
}

impl From<Vec<VertexId>> for Trip {
    fn from(vertices: Vec<VertexId>) -> Self {
        Self { vertices }
    }
}

pub fn read_trips(path: impl AsRef<Path>) -> Result<Vec<Trip>, GraphError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut trips = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trip: Trip =
            serde_json::from_str(&line).map_err(|e| GraphError::Parse(format!("line {}: {e}", lineno + 1)))?;
        trips.push(trip);
    }
    Ok(trips)
}

pub fn write_trips(path: impl AsRef<Path>, trips: &[Trip]) -> Result<(), GraphError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for t in trips {
        writeln!(out, "{}", serde_json::to_string(t).expect("trip serialization cannot fail"))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    index: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, index)
        other.dist.total_cmp(&self.dist).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over dense indices restricted to vertices where `allowed` holds.
/// Among equal-length routes the predecessor with the smallest id wins.
pub(crate) fn dijkstra_indices(
    g: &RoadGraph,
    s: usize,
    t: usize,
    allowed: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    let n = g.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(HeapEntry { dist: 0.0, index: s });
    while let Some(HeapEntry { dist: d, index: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == t {
            break;
        }
        for &(w, len) in &g.adj[u] {
            if done[w] || !allowed(w) {
                continue;
            }
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                pred[w] = u;
                heap.push(HeapEntry { dist: nd, index: w });
            } else if nd == dist[w] && g.vertices[u].id < g.vertices[pred[w]].id {
                pred[w] = u;
            }
        }
    }
    if !done[t] {
        return None;
    }
    let mut path = vec![t];
    let mut cur = t;
    while cur != s {
        cur = pred[cur];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

/// Minimum-length trip from `s` to `t` that avoids `blocked`.
pub fn shortest_path(
    g: &RoadGraph,
    s: VertexId,
    t: VertexId,
    blocked: &HashSet<VertexId>,
) -> Result<Option<Trip>, GraphError> {
    let is = g.require(s)?;
    let it = g.require(t)?;
    if blocked.contains(&s) || blocked.contains(&t) {
        return Ok(None);
    }
    let blocked_idx: Vec<bool> = g.vertices.iter().map(|v| blocked.contains(&v.id)).collect();
    Ok(dijkstra_indices(g, is, it, |i| !blocked_idx[i])
        .map(|p| Trip::new(p.into_iter().map(|i| g.id_at(i)).collect())))
}

/// Loop-free and detour-free check.
///
/// A detour is a trip vertex with three or more *other* trip vertices among
/// its graph neighbors.
pub fn is_simple_trip(g: &RoadGraph, trip: &Trip) -> Result<bool, GraphError> {
    g.check_path(trip)?;
    let idx: Vec<usize> = trip.vertices.iter().map(|&v| g.require(v)).collect::<Result<_, _>>()?;
    let mut on_trip = vec![false; g.vertex_count()];
    for &i in &idx {
        if on_trip[i] {
            return Ok(false);
        }
        on_trip[i] = true;
    }
    for &i in &idx {
        if g.neighbors_of_index(i).filter(|&n| on_trip[n]).count() >= 3 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Region-level view of a road graph obtained by uniform square cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    pub cell_size: f64,
    pub region_graph: RoadGraph,
    /// Region id per road vertex, indexed by the road graph's dense index.
    vertex_to_region: Vec<VertexId>,
    road_ids: Vec<VertexId>,
    region_to_vertices: Vec<Vec<VertexId>>,
}

#[derive(Serialize, Deserialize)]
struct AbstractionFile {
    cell_size: f64,
    region_graph: GraphFile,
    vertex_to_region: Vec<[VertexId; 2]>,
}

impl Abstraction {
    pub fn region_count(&self) -> usize {
        self.region_graph.vertex_count()
    }

    /// Region of a road vertex.
    pub fn region_of(&self, road_vertex: VertexId) -> Option<VertexId> {
        let pos = self.road_ids.binary_search(&road_vertex).ok()?;
        Some(self.vertex_to_region[pos])
    }

    /// Road vertices in a region, ascending.
    pub fn vertices_of(&self, region: VertexId) -> &[VertexId] {
        match self.region_graph.index_of(region) {
            Some(i) => &self.region_to_vertices[i],
            None => &[],
        }
    }

    fn from_map(cell_size: f64, region_graph: RoadGraph, mut pairs: Vec<(VertexId, VertexId)>) -> Result<Self, GraphError> {
        pairs.sort_unstable();
        let mut region_to_vertices = vec![Vec::new(); region_graph.vertex_count()];
        let mut road_ids = Vec::with_capacity(pairs.len());
        let mut vertex_to_region = Vec::with_capacity(pairs.len());
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(GraphError::Invalid(format!("road vertex {} mapped twice", w[0].0)));
            }
        }
        for (v, r) in pairs {
            let ri = region_graph
                .index_of(r)
                .ok_or_else(|| GraphError::Invalid(format!("road vertex {v} mapped to unknown region {r}")))?;
            region_to_vertices[ri].push(v);
            road_ids.push(v);
            vertex_to_region.push(r);
        }
        Ok(Self { cell_size, region_graph, vertex_to_region, road_ids, region_to_vertices })
    }

    /// Checks that the abstraction covers `road` and matches its region edges.
    pub fn check_against(&self, road: &RoadGraph) -> Result<(), GraphError> {
        if self.road_ids.len() != road.vertex_count() {
            return Err(GraphError::Invalid("abstraction does not cover every road vertex".into()));
        }
        for v in road.vertices() {
            if self.region_of(v.id).is_none() {
                return Err(GraphError::Invalid(format!("road vertex {} has no region", v.id)));
            }
        }
        for e in road.edges() {
            let (a, b) = (self.region_of(e.u).unwrap(), self.region_of(e.v).unwrap());
            if a != b && !self.region_graph.are_adjacent(a, b) {
                return Err(GraphError::Invalid(format!("road edge ({}, {}) crosses non-adjacent regions", e.u, e.v)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = AbstractionFile {
            cell_size: self.cell_size,
            region_graph: GraphFile {
                nodes: self.region_graph.vertices().to_vec(),
                edges: self.region_graph.edges().to_vec(),
            },
            vertex_to_region: self.road_ids.iter().zip(&self.vertex_to_region).map(|(&v, &r)| [v, r]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("abstraction serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: AbstractionFile = serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        let region_graph = RoadGraph::new(file.region_graph.nodes, file.region_graph.edges)?;
        Self::from_map(file.cell_size, region_graph, file.vertex_to_region.into_iter().map(|[v, r]| (v, r)).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Partitions the bounding box of `g` into square cells of side `cell_size`.
///
/// Each nonempty cell becomes a region located at the cell center; region
/// ids follow (row, column) scan order. Two regions are adjacent iff some
/// road edge crosses between them.
pub fn abstract_graph(g: &RoadGraph, cell_size: f64) -> Result<Abstraction, GraphError> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(GraphError::Invalid(format!("cell size must be positive, got {cell_size}")));
    }
    let min_x = g.vertices.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
    let min_y = g.vertices.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
    let cell_of = |v: &Vertex| -> (u64, u64) {
        let col = ((v.x - min_x) / cell_size).floor() as u64;
        let row = ((v.y - min_y) / cell_size).floor() as u64;
        (row, col)
    };
    let mut cells: Vec<(u64, u64)> = g.vertices.iter().map(cell_of).collect();
    cells.sort_unstable();
    cells.dedup();
    let region_of_cell: FxHashMap<(u64, u64), VertexId> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let region_vertices: Vec<Vertex> = cells
        .iter()
        .enumerate()
        .map(|(id, &(row, col))| Vertex {
            id,
            x: min_x + (col as f64 + 0.5) * cell_size,
            y: min_y + (row as f64 + 0.5) * cell_size,
        })
        .collect();
    let assignment: Vec<VertexId> = g.vertices.iter().map(|v| region_of_cell[&cell_of(v)]).collect();

    let mut pairs = Vec::new();
    for e in &g.edges {
        let a = assignment[g.index[&e.u]];
        let b = assignment[g.index[&e.v]];
        if a != b {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let region_edges = pairs
        .into_iter()
        .map(|(a, b)| {
            let (va, vb) = (&region_vertices[a], &region_vertices[b]);
            Edge { u: a, v: b, length: (va.x - vb.x).hypot(va.y - vb.y) }
        })
        .collect();
    let region_graph = RoadGraph::new(region_vertices, region_edges)?;
    let map = g.vertices.iter().zip(&assignment).map(|(v, &r)| (v.id, r)).collect();
    Abstraction::from_map(cell_size, region_graph, map)
}

/// Maps a road trip to the region trip it traverses.
///
/// Consecutive duplicates collapse; a revisited region cuts out the enclosed
/// cycle (the first occurrence is kept and the walk continues from there).
pub fn project_trip(a: &Abstraction, trip: &Trip) -> Result<Trip, GraphError> {
    if trip.is_empty() {
        return Err(GraphError::EmptyTrip);
    }
    let mut out: Vec<VertexId> = Vec::new();
    for &v in &trip.vertices {
        let r = a.region_of(v).ok_or(GraphError::UnknownVertex(v))?;
        if out.last() == Some(&r) {
            continue;
        }
        if let Some(pos) = out.iter().position(|&x| x == r) {
            out.truncate(pos + 1);
        } else {
            out.push(r);
        }
    }
    for w in out.windows(2) {
        if !a.region_graph.are_adjacent(w[0], w[1]) {
            return Err(GraphError::NotAdjacent(w[0], w[1]));
        }
    }
    Ok(Trip::new(out))
}

/// Trips that deviate from shortest paths by avoiding the regions the
/// shortest path passes through.
///
/// For each random pair (s, t): take the shortest path, block every road
/// vertex of its intermediate regions (all regions other than those of s
/// and t) and reroute. When no intermediate region exists or the blocked
/// reroute fails, the shortest path itself is emitted.
pub fn generate_synthetic_trips(
    g: &RoadGraph,
    a: &Abstraction,
    count: usize,
    seed: u64,
) -> Result<Vec<Trip>, GraphError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = g.vertex_count();
    if n < 2 {
        return Err(GraphError::Invalid("need at least two vertices to generate trips".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trips = Vec::with_capacity(count);
    let max_attempts = 100 * count;
    let mut attempts = 0;
    while trips.len() < count {
        if attempts >= max_attempts {
            return Err(GraphError::GenerationExhausted { attempts, produced: trips.len() });
        }
        attempts += 1;
        let si = rng.gen_range(0..n);
        let mut ti = rng.gen_range(0..n - 1);
        if ti >= si {
            ti += 1;
        }
        let Some(path) = dijkstra_indices(g, si, ti, |_| true) else {
            continue;
        };
        let base = Trip::new(path.iter().map(|&i| g.id_at(i)).collect());
        let regions = project_trip(a, &base)?;
        let rs = a.region_of(g.id_at(si)).ok_or(GraphError::UnknownVertex(g.id_at(si)))?;
        let rt = a.region_of(g.id_at(ti)).ok_or(GraphError::UnknownVertex(g.id_at(ti)))?;
        let intermediate: Vec<VertexId> = regions.vertices.iter().copied().filter(|&r| r != rs && r != rt).collect();
        if intermediate.is_empty() {
            trips.push(base);
            continue;
        }
        let mut blocked = vec![false; n];
        for &r in &intermediate {
            for &v in a.vertices_of(r) {
                blocked[g.index[&v]] = true;
            }
        }
        match dijkstra_indices(g, si, ti, |i| !blocked[i]) {
            Some(p) => trips.push(Trip::new(p.into_iter().map(|i| g.id_at(i)).collect())),
            None => trips.push(base),
        }
    }
    Ok(trips)
}
