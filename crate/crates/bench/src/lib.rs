//! Fixtures shared by the benchmarks.

use tripdd_core::graph::{abstract_graph, build_grid_graph, generate_synthetic_trips};
use tripdd_core::route::{RouteModel, RouteQuery};

/// 16x16 road grid with 4x4 cells, trained on 500 synthetic trips, and
/// the endpoints of 100 held-out trips as queries.
pub fn desk_model() -> (RouteModel, Vec<RouteQuery>) {
    let road = build_grid_graph(16, 16, 1.0);
    let a = abstract_graph(&road, 4.0).expect("positive cell size");
    let train = generate_synthetic_trips(&road, &a, 500, 1).expect("grid is connected");
    let test = generate_synthetic_trips(&road, &a, 100, 2).expect("grid is connected");
    let mut m = RouteModel::compile(road, a, None).expect("4x4 region grid compiles");
    m.train(&train).expect("trips are valid");
    let queries = test.iter().filter_map(|t| t.terminals()).map(|(s, t)| RouteQuery { s, t }).collect();
    (m, queries)
}
