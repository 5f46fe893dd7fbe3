//! Match-rate scoring, evaluation over test trips and runtime comparison.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::thread;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::compile::ProbDiagram;
use crate::encode::Assignment;
use crate::graph::{GraphError, RoadGraph, Trip};
use crate::inference::{compute_prob, InferenceError, Sampler};
use crate::route::{derive_seed, Method, RouteError, RouteModel, RouteQuery, SampleConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest variable count `distribution_check` enumerates.
pub const MAX_CHECK_VARS: u32 = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("diagram has {0} variables; enumeration supports at most {max}", max = MAX_CHECK_VARS)]
    TooLarge(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchRate {
    pub rate: f64,
    /// Set when the proposed trip was empty (rate is then 0).
    pub empty_proposed: bool,
}

/// Fraction of ground-trip vertices within euclidean distance `eps` of some
/// proposed-trip vertex.
pub fn match_rate(g: &RoadGraph, ground: &Trip, proposed: &Trip, eps: f64) -> Result<MatchRate, EvalError> {
    if ground.is_empty() {
        return Err(EvalError::Invalid("ground trip is empty".into()));
    }
    if !(eps >= 0.0) {
        return Err(EvalError::Invalid(format!("epsilon must be nonnegative, got {eps}")));
    }
    if proposed.is_empty() {
        return Ok(MatchRate { rate: 0.0, empty_proposed: true });
    }
    let coords = |t: &Trip| -> Result<Vec<(f64, f64)>, EvalError> {
        t.vertices
            .iter()
            .map(|&v| g.vertex(v).map(|p| (p.x, p.y)).ok_or(EvalError::Graph(GraphError::UnknownVertex(v))))
            .collect()
    };
    let mut ground_ids = ground.vertices.clone();
    ground_ids.sort_unstable();
    ground_ids.dedup();
    let ground_pts = coords(&Trip::new(ground_ids))?;
    let proposed_pts = coords(proposed)?;
    let close = ground_pts
        .iter()
        .filter(|&&(x, y)| proposed_pts.iter().any(|&(px, py)| (x - px).hypot(y - py) <= eps))
        .count();
    Ok(MatchRate { rate: close as f64 / ground_pts.len() as f64, empty_proposed: false })
}

/// Nearest-rank percentile of ascending `sorted` (`p` in (0, 100]).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            count: sorted.len(),
            p25: percentile(&sorted, 25.0),
            p50: percentile(&sorted, 50.0),
            p75: percentile(&sorted, 75.0),
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub samples_per_instance: usize,
    /// Defaults to the road graph's median edge length.
    pub epsilon: Option<f64>,
    /// Attempt and time budgets per sample; `seed` is the run seed.
    pub sample: SampleConfig,
    pub workers: usize,
}

impl EvalConfig {
    pub const DEFAULT_SAMPLES: usize = 20;
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { samples_per_instance: Self::DEFAULT_SAMPLES, epsilon: None, sample: SampleConfig::default(), workers: 1 }
    }
}

/// Median scores of one method on one test trip; `None` when every draw
/// failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceScore {
    pub exact: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub completed: usize,
    pub failures: usize,
    pub exact: Option<Summary>,
    pub epsilon: Option<Summary>,
    /// Statistics over instances completed by every method.
    pub exact_common: Option<Summary>,
    pub epsilon_common: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub epsilon: f64,
    pub instances: usize,
    pub samples_per_instance: usize,
    /// Instances completed by every method.
    pub common_completed: usize,
    pub methods: Vec<MethodReport>,
    /// `scores[i][m]`: instance `i`, method `methods[m]`.
    pub scores: Vec<Vec<InstanceScore>>,
}

impl MatchReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "epsilon = {:.6}, instances = {}, common completed = {}", self.epsilon, self.instances, self.common_completed).unwrap();
        writeln!(s, "{:<12} {:>9} {:>8} {:<5} {:>8} {:>8}", "method", "completed", "failures", "stat", "exact", "eps").unwrap();
        for r in &self.methods {
            let rows: [(&str, fn(&Summary) -> f64); 5] =
                [("25%", |x| x.p25), ("50%", |x| x.p50), ("75%", |x| x.p75), ("Mean", |x| x.mean), ("Std", |x| x.std)];
            for (i, (label, f)) in rows.iter().enumerate() {
                let cell = |x: &Option<Summary>| x.as_ref().map_or("-".to_string(), |x| format!("{:.3}", f(x)));
                let (name, completed, failures) = if i == 0 {
                    (r.method.name().to_string(), r.completed.to_string(), r.failures.to_string())
                } else {
                    (String::new(), String::new(), String::new())
                };
                writeln!(
                    s,
                    "{name:<12} {completed:>9} {failures:>8} {label:<5} {:>8} {:>8}",
                    cell(&r.exact),
                    cell(&r.epsilon)
                )
                .unwrap();
            }
        }
        s
    }
}

fn query_of(trip: &Trip) -> Result<RouteQuery, EvalError> {
    match trip.terminals() {
        Some((s, t)) => Ok(RouteQuery { s, t }),
        None => Err(EvalError::Invalid("test trip is empty".into())),
    }
}

/// Median of non-empty `values` under the nearest-rank convention.
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    percentile(values, 50.0)
}

fn score_instance(
    model: &RouteModel,
    ground: &Trip,
    index: usize,
    method: Method,
    cfg: &EvalConfig,
    eps: f64,
) -> Result<InstanceScore, EvalError> {
    let q = query_of(ground)?;
    let draws = if method == Method::Shortest { 1 } else { cfg.samples_per_instance.max(1) };
    let instance_seed = derive_seed(cfg.sample.seed, index as u64);
    let mut exact = Vec::with_capacity(draws);
    let mut close = Vec::with_capacity(draws);
    for j in 0..draws {
        let sc = SampleConfig { seed: derive_seed(instance_seed, j as u64), ..cfg.sample.clone() };
        let outcome = match model.run(method, q, &sc) {
            Ok(o) => o,
            Err(RouteError::Unsatisfiable(..) | RouteError::SameVertex(_)) => break,
            Err(e) => return Err(e.into()),
        };
        let Some(trip) = outcome.trip else { continue };
        exact.push(match_rate(model.road(), ground, &trip, 0.0)?.rate);
        close.push(match_rate(model.road(), ground, &trip, eps)?.rate);
    }
    if exact.is_empty() {
        return Ok(InstanceScore { exact: None, epsilon: None });
    }
    Ok(InstanceScore { exact: Some(median(&mut exact)), epsilon: Some(median(&mut close)) })
}

/// Runs `job(i)` for `0..n` on up to `workers` threads, results in index
/// order.
fn parallel_map<T: Send>(n: usize, workers: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(job).collect();
    }
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk = n.div_ceil(workers);
    thread::scope(|scope| {
        for (w, slot) in out.chunks_mut(chunk).enumerate() {
            let job = &job;
            scope.spawn(move || {
                for (k, cell) in slot.iter_mut().enumerate() {
                    *cell = Some(job(w * chunk + k));
                }
            });
        }
    });
    out.into_iter().map(|x| x.expect("every slot filled")).collect()
}

/// Scores every method on every test trip (queried by its endpoints).
///
/// Sampling methods draw `samples_per_instance` trips and keep the median
/// rate over the draws that succeeded; an instance where every draw fails
/// counts as a failure and is excluded from the statistics.
pub fn evaluate_suite(model: &RouteModel, tests: &[Trip], methods: &[Method], cfg: &EvalConfig) -> Result<MatchReport, EvalError> {
    let eps = cfg.epsilon.unwrap_or_else(|| model.road().median_edge_length());
    let rows = parallel_map(tests.len(), cfg.workers, |i| {
        methods.iter().map(|&m| score_instance(model, &tests[i], i, m, cfg, eps)).collect::<Result<Vec<_>, _>>()
    });
    let scores = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let common: Vec<bool> = scores.iter().map(|row| row.iter().all(|s| s.exact.is_some())).collect();
    let reports = methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let col = |common_only: bool, f: fn(&InstanceScore) -> Option<f64>| -> Vec<f64> {
                scores.iter().zip(&common).filter(|(_, &c)| c || !common_only).filter_map(|(row, _)| f(&row[m])).collect()
            };
            let exact = col(false, |s| s.exact);
            MethodReport {
                method,
                completed: exact.len(),
                failures: tests.len() - exact.len(),
                exact: Summary::of(&exact),
                epsilon: Summary::of(&col(false, |s| s.epsilon)),
                exact_common: Summary::of(&col(true, |s| s.exact)),
                epsilon_common: Summary::of(&col(true, |s| s.epsilon)),
            }
        })
        .collect();
    Ok(MatchReport {
        epsilon: eps,
        instances: tests.len(),
        samples_per_instance: cfg.samples_per_instance,
        common_completed: common.iter().filter(|&&c| c).count(),
        methods: reports,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodTiming {
    pub method: Method,
    /// Seconds per query; `None` for queries that failed.
    pub seconds: Vec<Option<f64>>,
    pub timeouts: usize,
    /// Per-query time relative to the shortest-path baseline.
    pub ratio: Option<Summary>,
    pub absolute: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeReport {
    pub queries: usize,
    pub methods: Vec<MethodTiming>,
}

impl RuntimeReport {
    pub fn method(&self, m: Method) -> Option<&MethodTiming> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "relative runtime vs shortest ({} queries)", self.queries).unwrap();
        writeln!(s, "{:<12} {:>12} {:>12} {:>12} {:>12} {:>9}", "method", "25%", "50%", "75%", "mean", "timeouts").unwrap();
        for r in &self.methods {
            let c = |f: fn(&Summary) -> f64| r.ratio.as_ref().map_or("-".to_string(), |x| format!("{:.3e}", f(x)));
            writeln!(
                s,
                "{:<12} {:>12} {:>12} {:>12} {:>12} {:>9}",
                r.method.name(),
                c(|x| x.p25),
                c(|x| x.p50),
                c(|x| x.p75),
                c(|x| x.mean),
                r.timeouts
            )
            .unwrap();
        }
        s
    }
}

fn seconds(d: Duration) -> f64 {
    d.as_secs_f64().max(1e-9)
}

/// Wall-clock per query and method, with ratios against the shortest-path
/// baseline (always timed, even if not listed).
pub fn benchmark_runtime(model: &RouteModel, queries: &[RouteQuery], methods: &[Method], cfg: &EvalConfig) -> Result<RuntimeReport, EvalError> {
    let mut all = vec![Method::Shortest];
    all.extend(methods.iter().copied().filter(|&m| m != Method::Shortest));
    let rows = parallel_map(queries.len(), cfg.workers, |i| {
        let sc = SampleConfig { seed: derive_seed(cfg.sample.seed, i as u64), ..cfg.sample.clone() };
        all.iter()
            .map(|&m| match model.run(m, queries[i], &sc) {
                Ok(o) => Ok(o.trip.map(|_| seconds(o.elapsed))),
                Err(RouteError::Unsatisfiable(..)) => Ok(None),
                Err(e) => Err(EvalError::from(e)),
            })
            .collect::<Result<Vec<_>, _>>()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for (m, &method) in all.iter().enumerate() {
        if method == Method::Shortest && !methods.contains(&Method::Shortest) {
            continue;
        }
        let secs: Vec<Option<f64>> = rows.iter().map(|r| r[m]).collect();
        let ratios: Vec<f64> = rows.iter().filter_map(|r| Some(r[m]? / r[0]?)).collect();
        let absolute: Vec<f64> = secs.iter().flatten().copied().collect();
        out.push(MethodTiming {
            method,
            timeouts: secs.iter().filter(|s| s.is_none()).count(),
            seconds: secs,
            ratio: Summary::of(&ratios),
            absolute: Summary::of(&absolute),
        });
    }
    Ok(RuntimeReport { queries: queries.len(), methods: out })
}

/// Total-variation distance between `num_samples` conditioned samples and
/// the exact normalized weights of all satisfying completions of `cond`.
pub fn distribution_check(d: &ProbDiagram, cond: &Assignment, num_samples: usize, seed: u64) -> Result<f64, EvalError> {
    let n = d.num_vars();
    if n > MAX_CHECK_VARS {
        return Err(EvalError::TooLarge(n));
    }
    let sampler = Sampler::new(d, cond)?;
    let z = sampler.condition_prob();
    let mut exact: HashMap<Assignment, f64> = HashMap::new();
    for bits in 0u64..(1 << n) {
        let a = Assignment::from_bools(&(0..n).map(|i| bits >> (n - 1 - i) & 1 == 1).collect::<Vec<_>>());
        if a.agrees_with(cond) && d.accepts(&a) {
            let p = compute_prob(d, &a)? / z;
            exact.insert(a, p);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freq: HashMap<Assignment, usize> = HashMap::new();
    for _ in 0..num_samples {
        *freq.entry(sampler.sample(&mut rng)).or_default() += 1;
    }
    let total = num_samples.max(1) as f64;
    let mut tv: f64 = exact.iter().map(|(a, p)| (p - *freq.get(a).unwrap_or(&0) as f64 / total).abs()).sum();
    tv += freq.iter().filter(|(a, _)| !exact.contains_key(*a)).map(|(_, &c)| c as f64 / total).sum::<f64>();
    Ok(tv / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile_cnf, smooth, CompileOptions};
    use crate::encode::{encode_relaxed, enumerate_solutions};
    use crate::graph::{abstract_graph, build_grid_graph, shortest_path};
    use crate::inference::{finalize_params, prob_learn};
    use proptest::prelude::*;
    use std::collections::HashSet;

    const D: usize = 3;
    const E: usize = 4;
    const H: usize = 7;

    #[test]
    fn match_rate_examples() {
        let g = build_grid_graph(3, 3, 1.0);
        let ground = Trip::new(vec![D, E, H]);
        assert_eq!(match_rate(&g, &ground, &ground, 0.0).unwrap().rate, 1.0);
        let r = match_rate(&g, &ground, &Trip::new(vec![D]), 0.0).unwrap();
        assert!((r.rate - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(match_rate(&g, &ground, &Trip::new(vec![0]), 3.0).unwrap().rate, 1.0);
        let empty = match_rate(&g, &ground, &Trip::new(vec![]), 1.0).unwrap();
        assert_eq!(empty, MatchRate { rate: 0.0, empty_proposed: true });
        // d and h are within distance 1 of e only
        assert!((match_rate(&g, &ground, &Trip::new(vec![0, 1, 2]), 1.0).unwrap().rate - 2.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn match_rate_properties(
            ground in proptest::collection::vec(0usize..16, 1..8),
            proposed in proptest::collection::vec(0usize..16, 1..8),
            e1 in 0.0f64..5.0,
            e2 in 0.0f64..5.0,
        ) {
            let g = build_grid_graph(4, 4, 1.0);
            let (gt, pt) = (Trip::new(ground.clone()), Trip::new(proposed.clone()));
            let r = match_rate(&g, &gt, &pt, e1).unwrap().rate;
            prop_assert!((0.0..=1.0).contains(&r));
            let rev = |v: &Vec<usize>| Trip::new(v.iter().rev().copied().collect());
            prop_assert_eq!(r, match_rate(&g, &rev(&ground), &rev(&proposed), e1).unwrap().rate);
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(match_rate(&g, &gt, &pt, lo).unwrap().rate <= match_rate(&g, &gt, &pt, hi).unwrap().rate);
        }
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 25.0), 3.0);
        assert_eq!(percentile(&v, 50.0), 5.0);
        assert_eq!(percentile(&v, 75.0), 8.0);
        assert_eq!(percentile(&v, 100.0), 10.0);
        assert_eq!(percentile(&[4.0], 1.0), 4.0);
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.p50, s.mean, s.std), (1.0, 2.0, 1.0));
        assert!(Summary::of(&[]).is_none());
    }

    fn small_model() -> RouteModel {
        let road = build_grid_graph(8, 8, 1.0);
        let a = abstract_graph(&road, 2.0).unwrap();
        RouteModel::compile(road, a, None).unwrap()
    }

    #[test]
    fn shortest_on_its_own_paths_is_perfect() {
        let m = small_model();
        let tests: Vec<Trip> = [(0, 63), (5, 40), (9, 14)]
            .iter()
            .map(|&(s, t)| shortest_path(m.road(), s, t, &HashSet::new()).unwrap().unwrap())
            .collect();
        let r = evaluate_suite(&m, &tests, &[Method::Shortest], &EvalConfig::default()).unwrap();
        assert_eq!(r.epsilon, 1.0);
        let s = r.method(Method::Shortest).unwrap();
        assert_eq!((s.completed, s.failures), (3, 0));
        assert_eq!(s.epsilon.unwrap().p50, 1.0);
        assert_eq!(s.exact.unwrap().mean, 1.0);
    }

    #[test]
    fn suite_is_deterministic_and_parallel_safe() {
        let m = small_model();
        let tests = crate::graph::generate_synthetic_trips(m.road(), m.abstraction(), 6, 3).unwrap();
        let mut cfg = EvalConfig { samples_per_instance: 5, ..EvalConfig::default() };
        cfg.sample.seed = 9;
        let methods = [Method::SinglePass, Method::Stepwise, Method::Shortest];
        let a = evaluate_suite(&m, &tests, &methods, &cfg).unwrap();
        let b = evaluate_suite(&m, &tests, &methods, &EvalConfig { workers: 3, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.common_completed, 6);
        for r in &a.methods {
            let s = r.epsilon.unwrap();
            assert!(s.p25 <= s.p50 && s.p50 <= s.p75 && (0.0..=1.0).contains(&s.mean));
        }
        let table = a.to_table();
        for label in ["25%", "50%", "75%", "Mean"] {
            assert!(table.contains(label));
        }
        assert!(a.to_json().contains("\"single-pass\""));
    }

    #[test]
    fn runtime_ratios() {
        let m = small_model();
        let queries = [RouteQuery { s: 0, t: 63 }, RouteQuery { s: 7, t: 56 }, RouteQuery { s: 2, t: 61 }];
        let r = benchmark_runtime(&m, &queries, &Method::ALL, &EvalConfig::default()).unwrap();
        let shortest = r.method(Method::Shortest).unwrap().ratio.unwrap();
        assert_eq!((shortest.p25, shortest.p50, shortest.p75, shortest.mean), (1.0, 1.0, 1.0, 1.0));
        for t in &r.methods {
            assert_eq!(t.timeouts, 0);
            assert!(t.seconds.iter().all(|s| s.unwrap() > 0.0));
        }
        assert!(r.to_table().contains("stepwise"));
    }

    fn grid2x2() -> ProbDiagram {
        let f = encode_relaxed(&build_grid_graph(2, 2, 1.0)).unwrap();
        smooth(&compile_cnf(&f, &CompileOptions::for_formula(&f)).unwrap()).unwrap()
    }

    #[test]
    fn distribution_checks() {
        let f = encode_relaxed(&build_grid_graph(2, 2, 1.0)).unwrap();
        let sols = enumerate_solutions(&f).unwrap();
        let mut d = grid2x2();
        finalize_params(&mut d);
        assert!(distribution_check(&d, &Assignment::empty(8), 20_000, 1).unwrap() < 0.03);
        assert_eq!(distribution_check(&d, &sols[3], 100, 1).unwrap(), 0.0);

        for _ in 0..100 {
            prob_learn(&mut d, &sols[5]).unwrap();
        }
        finalize_params(&mut d);
        let sampler = Sampler::new(&d, &Assignment::empty(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut freq: HashMap<Assignment, usize> = HashMap::new();
        for _ in 0..2000 {
            *freq.entry(sampler.sample(&mut rng)).or_default() += 1;
        }
        let modal = freq.iter().max_by_key(|(_, &c)| c).unwrap().0;
        assert_eq!(modal, &sols[5]);
    }
}
