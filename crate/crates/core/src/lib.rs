//! Route prediction with probabilistic decision diagrams.
//!
//! The pipeline: encode the simple trips of a (region) graph as a relaxed
//! CNF ([`encode`]), compile it into a smooth OBDD[and] ([`compile`]), learn
//! branch parameters from historical trips and sample conditioned on the
//! query endpoints ([`inference`]), then refine and expand the sampled
//! region trip into a road trip ([`route`]). [`eval`] scores predictions.

pub mod compile;
pub mod encode;
pub mod eval;
pub mod graph;
pub mod inference;
pub mod route;

pub use compile::{
    compile_cnf, model_count, smooth, validate, CompileError, CompileOptions, DecisionNode, DiagramError, Node,
    NodeId, ProbDiagram, ValidationReport,
};
pub use encode::{encode_relaxed, enumerate_solutions, trip_to_assignment, Assignment, CnfFormula, VarMap};
pub use graph::{abstract_graph, build_grid_graph, is_simple_trip, shortest_path, Abstraction, RoadGraph, Trip};
pub use inference::{compute_prob, finalize_params, prob_learn, prob_sample, InferenceError, ModelMeta, Sampler};
pub use route::{derive_seed, Method, RouteError, RouteModel, RouteOutcome, RouteQuery, SampleConfig};
pub use eval::{benchmark_runtime, distribution_check, evaluate_suite, match_rate, EvalConfig, MatchReport, RuntimeReport};
